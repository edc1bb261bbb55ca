//! Deterministic table images: style sampling, layout, SVG emission and
//! optional rasterization to PNG.
//!
//! SVG is the canonical artifact. Rasterization goes through the
//! [`Rasterizer`] trait so the backend can be an in-process renderer or an
//! external converter declared in config.

use thiserror::Error;

use crate::table::TableError;

mod layout;
mod raster;
mod style;
mod svg;

pub use layout::{font_px, layout, CellBox, FontMetrics, LayoutPlan};
#[cfg(feature = "resvg")]
pub use raster::ResvgRasterizer;
pub use raster::{png_dimensions, raster_size, rasterize, svg_size, CommandRasterizer, Rasterizer};
pub use style::{
    sample_style, sample_style_with, FamilyRanges, Rgb, StyleFamily, StyleMix, StyleRanges, StyleSpec,
};
pub use svg::{cell_fill, render_planned, render_svg};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    InvalidTable(#[from] TableError),
    #[error("invalid style: {0}")]
    InvalidStyle(String),
    #[error("invalid style mix: {0}")]
    InvalidMix(String),
    #[error("style config: {0}")]
    Config(String),
    #[error("no rasterizer backend configured")]
    RasterizerUnavailable,
    #[error("rasterization failed: {0}")]
    Raster(String),
}
