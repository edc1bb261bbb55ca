use std::process::Command;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::RenderError;

/// Turns an SVG document into PNG bytes.
pub trait Rasterizer: Send + Sync {
    fn rasterize(&self, svg: &str, dpi: u32) -> Result<Vec<u8>, RenderError>;

    /// Whether calls may run in parallel. Unsafe backends are serialized.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

static SERIAL: Mutex<()> = Mutex::new(());

/// Rasterizes through `backend`; `None` means no backend was configured.
pub fn rasterize(svg: &str, dpi: u32, backend: Option<&dyn Rasterizer>) -> Result<Vec<u8>, RenderError> {
    let backend = backend.ok_or(RenderError::RasterizerUnavailable)?;
    if dpi == 0 {
        return Err(RenderError::Raster("dpi must be positive".into()));
    }
    if backend.concurrent_safe() {
        backend.rasterize(svg, dpi)
    } else {
        let _guard = SERIAL.lock().unwrap_or_else(|p| p.into_inner());
        backend.rasterize(svg, dpi)
    }
}

/// `width`/`height` attributes of the root `<svg>` element, in CSS pixels.
pub fn svg_size(svg: &str) -> Option<(u32, u32)> {
    let start = svg.find("<svg")?;
    let tag = &svg[start..start + svg[start..].find('>')?];
    let attr = |name: &str| -> Option<u32> {
        let key = format!(" {name}=\"");
        let from = tag.find(&key)? + key.len();
        let v = &tag[from..from + tag[from..].find('"')?];
        v.trim_end_matches("px").parse::<f64>().ok().map(|f| f.ceil() as u32)
    };
    Some((attr("width")?, attr("height")?))
}

/// Pixel size of a rendering at `dpi` (96 dpi is 1:1).
pub fn raster_size(size: (u32, u32), dpi: u32) -> (u32, u32) {
    let scale = |v: u32| (v as u64 * dpi as u64).div_ceil(96) as u32;
    (scale(size.0), scale(size.1))
}

/// Shells out to a converter. The template is split on whitespace and the
/// tokens `{input}`, `{output}`, `{dpi}`, `{width}` and `{height}` are
/// substituted, e.g. `rsvg-convert -w {width} -h {height} -o {output} {input}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandRasterizer {
    pub command: String,
    #[serde(default)]
    pub concurrent_safe: bool,
}

impl Rasterizer for CommandRasterizer {
    fn rasterize(&self, svg: &str, dpi: u32) -> Result<Vec<u8>, RenderError> {
        let size = svg_size(svg).ok_or_else(|| RenderError::Raster("svg has no width/height".into()))?;
        let (w, h) = raster_size(size, dpi);
        let dir = tempfile::tempdir().map_err(|e| RenderError::Raster(e.to_string()))?;
        let input = dir.path().join("in.svg");
        let output = dir.path().join("out.png");
        std::fs::write(&input, svg).map_err(|e| RenderError::Raster(e.to_string()))?;
        let args: Vec<String> = self
            .command
            .split_whitespace()
            .map(|tok| {
                tok.replace("{input}", &input.to_string_lossy())
                    .replace("{output}", &output.to_string_lossy())
                    .replace("{dpi}", &dpi.to_string())
                    .replace("{width}", &w.to_string())
                    .replace("{height}", &h.to_string())
            })
            .collect();
        let (program, rest) = args
            .split_first()
            .ok_or_else(|| RenderError::Raster("empty rasterizer command".into()))?;
        let status = Command::new(program)
            .args(rest)
            .status()
            .map_err(|e| RenderError::Raster(format!("cannot run `{program}`: {e}")))?;
        if !status.success() {
            return Err(RenderError::Raster(format!("`{program}` exited with {status}")));
        }
        std::fs::read(&output).map_err(|e| RenderError::Raster(format!("no output from `{program}`: {e}")))
    }

    fn concurrent_safe(&self) -> bool {
        self.concurrent_safe
    }
}

/// In-process rasterizer. Text is drawn only when fonts are available, so
/// by default system fonts are loaded once on first use.
#[cfg(feature = "resvg")]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResvgRasterizer {
    pub load_system_fonts: bool,
}

#[cfg(feature = "resvg")]
impl Default for ResvgRasterizer {
    fn default() -> Self {
        Self { load_system_fonts: true }
    }
}

#[cfg(feature = "resvg")]
impl Rasterizer for ResvgRasterizer {
    fn rasterize(&self, svg: &str, dpi: u32) -> Result<Vec<u8>, RenderError> {
        use resvg::{tiny_skia, usvg};
        use std::sync::{Arc, OnceLock};

        static FONTS: OnceLock<Arc<usvg::fontdb::Database>> = OnceLock::new();
        let mut opt = usvg::Options::default();
        if self.load_system_fonts {
            opt.fontdb = FONTS
                .get_or_init(|| {
                    let mut db = usvg::fontdb::Database::new();
                    db.load_system_fonts();
                    Arc::new(db)
                })
                .clone();
        }
        let tree = usvg::Tree::from_str(svg, &opt).map_err(|e| RenderError::Raster(e.to_string()))?;
        let size = svg_size(svg).unwrap_or_else(|| {
            let s = tree.size();
            (s.width().ceil() as u32, s.height().ceil() as u32)
        });
        let (w, h) = raster_size(size, dpi);
        let mut pixmap = tiny_skia::Pixmap::new(w.max(1), h.max(1))
            .ok_or_else(|| RenderError::Raster(format!("cannot allocate {w}x{h} image")))?;
        pixmap.fill(tiny_skia::Color::WHITE);
        let scale = dpi as f32 / 96.0;
        resvg::render(&tree, tiny_skia::Transform::from_scale(scale, scale), &mut pixmap.as_mut());
        pixmap.encode_png().map_err(|e| RenderError::Raster(e.to_string()))
    }
}

/// Width and height from a PNG header.
pub fn png_dimensions(png: &[u8]) -> Option<(u32, u32)> {
    if png.len() < 24 || &png[..8] != b"\x89PNG\r\n\x1a\n" || &png[12..16] != b"IHDR" {
        return None;
    }
    let be = |b: &[u8]| u32::from_be_bytes([b[0], b[1], b[2], b[3]]);
    Some((be(&png[16..20]), be(&png[20..24])))
}
