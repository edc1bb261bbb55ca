use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::RenderError;

/// Visual family of a rendered table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StyleFamily {
    WebPage,
    Excel,
    Markdown,
}

impl StyleFamily {
    pub const ALL: [StyleFamily; 3] = [StyleFamily::WebPage, StyleFamily::Excel, StyleFamily::Markdown];
}

impl fmt::Display for StyleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StyleFamily::WebPage => "WebPage",
            StyleFamily::Excel => "Excel",
            StyleFamily::Markdown => "Markdown",
        })
    }
}

impl FromStr for StyleFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "webpage" | "web" => Ok(Self::WebPage),
            "excel" => Ok(Self::Excel),
            "markdown" => Ok(Self::Markdown),
            other => Err(format!("unknown style family `{other}`")),
        }
    }
}

/// 24-bit RGB color, written as `#rrggbb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const WHITE: Rgb = Rgb(255, 255, 255);
    pub const BLACK: Rgb = Rgb(0, 0, 0);

    /// Relative luminance in [0, 1] (sRGB weights, no gamma).
    pub fn luminance(self) -> f64 {
        (0.2126 * self.0 as f64 + 0.7152 * self.1 as f64 + 0.0722 * self.2 as f64) / 255.0
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

impl FromStr for Rgb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix('#').unwrap_or(s);
        if hex.len() != 6 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(format!("invalid color `{s}`, expected #rrggbb"));
        }
        let p = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).unwrap();
        Ok(Rgb(p(0), p(2), p(4)))
    }
}

impl Serialize for Rgb {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Resolved visual parameters for one rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSpec {
    pub family: StyleFamily,
    pub font_family: String,
    /// Points.
    pub font_size: f64,
    pub header_fill: Rgb,
    pub zebra_fill: Option<Rgb>,
    pub border_width: u32,
    pub cell_padding: u32,
    pub max_col_width: u32,
}

impl StyleSpec {
    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.font_size > 0.0 && self.font_size.is_finite()) {
            return Err(RenderError::InvalidStyle(format!("font_size must be > 0, got {}", self.font_size)));
        }
        if self.max_col_width <= self.cell_padding * 2 {
            return Err(RenderError::InvalidStyle(format!(
                "max_col_width {} must exceed twice the padding {}",
                self.max_col_width, self.cell_padding
            )));
        }
        Ok(())
    }

    /// A fixed style per family, handy for examples and debugging.
    pub fn plain(family: StyleFamily) -> Self {
        let (font, header_fill) = match family {
            StyleFamily::WebPage => ("Arial", Rgb(0xf2, 0xf2, 0xf2)),
            StyleFamily::Excel => ("Calibri", Rgb(0xd9, 0xd9, 0xd9)),
            StyleFamily::Markdown => ("DejaVu Sans Mono", Rgb::WHITE),
        };
        Self {
            family,
            font_family: font.to_string(),
            font_size: 12.0,
            header_fill,
            zebra_fill: None,
            border_width: 1,
            cell_padding: 6,
            max_col_width: 240,
        }
    }
}

/// Probability of each family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StyleMix {
    pub weights: BTreeMap<StyleFamily, f64>,
}

impl Default for StyleMix {
    /// 70.8% web page, 19.4% spreadsheet, 9.8% Markdown.
    fn default() -> Self {
        Self::new([
            (StyleFamily::WebPage, 0.708),
            (StyleFamily::Excel, 0.194),
            (StyleFamily::Markdown, 0.098),
        ])
    }
}

impl StyleMix {
    pub fn new(weights: impl IntoIterator<Item = (StyleFamily, f64)>) -> Self {
        Self {
            weights: weights.into_iter().collect(),
        }
    }

    pub fn only(family: StyleFamily) -> Self {
        Self::new([(family, 1.0)])
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if self.weights.values().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(RenderError::InvalidMix("weights must be finite and non-negative".into()));
        }
        let sum: f64 = self.weights.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(RenderError::InvalidMix(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn weight(&self, family: StyleFamily) -> f64 {
        self.weights.get(&family).copied().unwrap_or(0.0)
    }

    /// Inverse-CDF draw over families in declaration order.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> StyleFamily {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = None;
        for (&family, &w) in &self.weights {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last = Some(family);
            if u < acc {
                return family;
            }
        }
        last.unwrap_or(StyleFamily::WebPage)
    }
}

/// Ranges one family's parameters are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRanges {
    pub fonts: Vec<String>,
    pub font_size: (f64, f64),
    pub header_fills: Vec<Rgb>,
    pub zebra_prob: f64,
    pub zebra_fills: Vec<Rgb>,
    pub border_width: (u32, u32),
    pub cell_padding: (u32, u32),
    pub max_col_width: (u32, u32),
}

impl FamilyRanges {
    fn validate(&self, name: &str) -> Result<(), RenderError> {
        let bad = |m: &str| Err(RenderError::Config(format!("[{name}] {m}")));
        if self.fonts.is_empty() || self.header_fills.is_empty() {
            return bad("fonts and header_fills must be non-empty");
        }
        if self.zebra_prob > 0.0 && self.zebra_fills.is_empty() {
            return bad("zebra_fills must be non-empty when zebra_prob > 0");
        }
        if !(0.0..=1.0).contains(&self.zebra_prob) {
            return bad("zebra_prob must lie in [0, 1]");
        }
        if !(self.font_size.0 > 0.0 && self.font_size.0 <= self.font_size.1) {
            return bad("font_size range must be positive and ordered");
        }
        for (lo, hi, what) in [
            (self.border_width.0, self.border_width.1, "border_width"),
            (self.cell_padding.0, self.cell_padding.1, "cell_padding"),
            (self.max_col_width.0, self.max_col_width.1, "max_col_width"),
        ] {
            if lo > hi {
                return bad(&format!("{what} range is reversed"));
            }
        }
        if self.max_col_width.0 <= 2 * self.cell_padding.1 {
            return bad("max_col_width must exceed twice the largest padding");
        }
        Ok(())
    }
}

/// Style config file: one table of ranges per family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleRanges {
    pub web_page: FamilyRanges,
    pub excel: FamilyRanges,
    pub markdown: FamilyRanges,
}

const DEFAULT_RANGES: &str = include_str!("../../assets/style_ranges.toml");

impl Default for StyleRanges {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_RANGES).expect("bundled style ranges are valid")
    }
}

impl StyleRanges {
    pub fn from_toml_str(s: &str) -> Result<Self, RenderError> {
        let ranges: Self = toml::from_str(s).map_err(|e| RenderError::Config(e.to_string()))?;
        ranges.web_page.validate("web_page")?;
        ranges.excel.validate("excel")?;
        ranges.markdown.validate("markdown")?;
        Ok(ranges)
    }

    pub fn load(path: &Path) -> Result<Self, RenderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RenderError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn family(&self, family: StyleFamily) -> &FamilyRanges {
        match family {
            StyleFamily::WebPage => &self.web_page,
            StyleFamily::Excel => &self.excel,
            StyleFamily::Markdown => &self.markdown,
        }
    }
}

/// Draws a style with the bundled parameter ranges.
pub fn sample_style(mix: &StyleMix, seed: u64) -> Result<StyleSpec, RenderError> {
    sample_style_with(mix, &StyleRanges::default(), seed)
}

pub fn sample_style_with(mix: &StyleMix, ranges: &StyleRanges, seed: u64) -> Result<StyleSpec, RenderError> {
    mix.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let family = mix.draw(&mut rng);
    let r = ranges.family(family);
    // font sizes are kept to half-point steps
    let font_size = (rng.gen_range(r.font_size.0..=r.font_size.1) * 2.0).round() / 2.0;
    let zebra_fill = if rng.gen_bool(r.zebra_prob) {
        r.zebra_fills.choose(&mut rng).copied()
    } else {
        None
    };
    let spec = StyleSpec {
        family,
        font_family: r.fonts.choose(&mut rng).cloned().unwrap_or_default(),
        font_size,
        header_fill: *r.header_fills.choose(&mut rng).unwrap_or(&Rgb::WHITE),
        zebra_fill,
        border_width: rng.gen_range(r.border_width.0..=r.border_width.1),
        cell_padding: rng.gen_range(r.cell_padding.0..=r.cell_padding.1),
        max_col_width: rng.gen_range(r.max_col_width.0..=r.max_col_width.1),
    };
    spec.validate()?;
    Ok(spec)
}
