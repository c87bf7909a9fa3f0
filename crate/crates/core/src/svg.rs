use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::instance::Layout;

/// SVG drawing of the container and every unit circle, with a 5% margin.
pub fn render_svg(layout: &Layout, radius: f64) -> String {
    let extent = radius.max(
        layout
            .centers()
            .iter()
            .map(|c| c.x.abs().max(c.y.abs()) + 1.0)
            .fold(0.0, f64::max),
    );
    let half = extent * 1.05;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.6} {:.6} {:.6} {:.6}" width="800" height="800">"#,
        -half,
        -half,
        2.0 * half,
        2.0 * half
    )
    .unwrap();
    writeln!(
        out,
        r##"<circle cx="0" cy="0" r="{radius:.6}" fill="none" stroke="#222" stroke-width="{:.6}"/>"##,
        extent * 0.004
    )
    .unwrap();
    for c in layout.centers() {
        writeln!(
            out,
            r##"<circle cx="{:.6}" cy="{:.6}" r="1" fill="#8ab4d8" stroke="#1f4e79" stroke-width="0.05"/>"##,
            c.x, -c.y
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(layout: &Layout, radius: f64, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), render_svg(layout, radius))
        .map_err(|e| crate::Error::Io(format!("{}: {e}", path.as_ref().display())))
}
