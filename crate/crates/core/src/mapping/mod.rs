//! Per-pixel inference over a masked scene and map rendering.

mod map;
mod render;

pub use map::{extract_all_pixels, extract_pixels, predict_map, read_predictions_csv, ChlMap, MapProvenance, CHL_BAND};
pub use render::{palette_position, percentile, render_png, Colorbar, Palette, Rendered, DEFAULT_GAMMA, DEFAULT_PERCENTILE};
