use std::fmt::Write;

/// A labelled point in a scatter plot.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

/// An arrow from the origin, for parameter vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotArrow {
    pub dx: f64,
    pub dy: f64,
    pub label: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scatter {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<PlotPoint>,
    /// Free-floating text, such as group names, drawn in italics.
    pub notes: Vec<PlotPoint>,
    pub arrows: Vec<PlotArrow>,
}

const SIZE: f64 = 520.0;
const MARGIN: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Scatter {
    /// Renders with equal scaling on both axes, centered on the origin.
    pub fn to_svg(&self) -> String {
        let extent = self
            .points
            .iter()
            .chain(&self.notes)
            .flat_map(|p| [p.x.abs(), p.y.abs()])
            .chain(self.arrows.iter().flat_map(|a| [a.dx.abs(), a.dy.abs()]))
            .filter(|v| v.is_finite())
            .fold(0.0f64, f64::max)
            .max(1e-9)
            * 1.1;
        let scale = (SIZE / 2.0 - MARGIN) / extent;
        let c = SIZE / 2.0;
        let px = |x: f64| c + x * scale;
        let py = |y: f64| c - y * scale;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{c}" y="20" text-anchor="middle" font-size="14">{}</text>"#, escape(&self.title));
        let _ = writeln!(
            s,
            r##"<g stroke="#bbb"><line x1="{MARGIN}" y1="{c}" x2="{}" y2="{c}"/><line x1="{c}" y1="{MARGIN}" x2="{c}" y2="{}"/></g>"##,
            SIZE - MARGIN,
            SIZE - MARGIN
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, SIZE - MARGIN, c - 6.0, escape(&self.x_label));
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, c + 6.0, MARGIN - 6.0, escape(&self.y_label));
        if !self.arrows.is_empty() {
            let _ = writeln!(
                s,
                r##"<defs><marker id="head" markerWidth="8" markerHeight="8" refX="6" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#c33"/></marker></defs>"##
            );
        }
        for a in &self.arrows {
            let _ = writeln!(
                s,
                r##"<line x1="{c}" y1="{c}" x2="{:.2}" y2="{:.2}" stroke="#c33" stroke-width="1.5" marker-end="url(#head)"/><text x="{:.2}" y="{:.2}" fill="#c33">{}</text>"##,
                px(a.dx),
                py(a.dy),
                px(a.dx) + 4.0,
                py(a.dy) - 4.0,
                escape(&a.label)
            );
        }
        for p in &self.points {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#2a6fb0"/><text x="{:.2}" y="{:.2}">{}</text>"##,
                px(p.x),
                py(p.y),
                px(p.x) + 5.0,
                py(p.y) - 5.0,
                escape(&p.label)
            );
        }
        for n in &self.notes {
            let _ = writeln!(
                s,
                r##"<text x="{:.2}" y="{:.2}" font-style="italic" fill="#555" text-anchor="middle">{}</text>"##,
                px(n.x),
                py(n.y),
                escape(&n.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
