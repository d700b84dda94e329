//! SVG line charts drawn from report tables.
//!
//! A figure names table columns instead of holding data, so every plotted
//! series is also a CSV column.

use plotters::prelude::*;

use crate::report::Table;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub table: String,
    pub x: String,
    pub ys: Vec<String>,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
}

impl Panel {
    pub fn new(title: &str, table: &str, x: &str, ys: &[&str]) -> Self {
        Self {
            title: title.into(),
            table: table.into(),
            x: x.into(),
            ys: ys.iter().map(|s| s.to_string()).collect(),
            x_label: x.into(),
            y_label: String::new(),
            log_x: false,
        }
    }

    pub fn labels(mut self, x: &str, y: &str) -> Self {
        self.x_label = x.into();
        self.y_label = y.into();
        self
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }
}

/// Panels laid out left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub file: String,
    pub panels: Vec<Panel>,
}

impl Figure {
    pub fn new(file: &str, panels: Vec<Panel>) -> Self {
        Self {
            file: file.into(),
            panels,
        }
    }
}

const PANEL_W: u32 = 520;
const PANEL_H: u32 = 400;

fn series<'a>(tables: &'a [Table], p: &Panel) -> Result<(&'a Table, Vec<f64>, Vec<(String, Vec<f64>)>), CliError> {
    let table = tables
        .iter()
        .find(|t| t.name == p.table)
        .ok_or_else(|| CliError::Usage(format!("figure refers to missing table '{}'", p.table)))?;
    let col = |name: &str| {
        table
            .numbers(name)
            .ok_or_else(|| CliError::Usage(format!("table '{}' has no numeric column '{name}'", table.name)))
    };
    let x = col(&p.x)?;
    let ys = p
        .ys
        .iter()
        .map(|y| Ok((y.clone(), col(y)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((table, x, ys))
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn draw_panel<DB: DrawingBackend>(area: &DrawingArea<DB, plotters::coord::Shift>, tables: &[Table], p: &Panel) -> Result<(), CliError>
where
    DB::ErrorType: 'static,
{
    let (_, x, ys) = series(tables, p)?;
    let finite = |v: &&f64| v.is_finite();
    let (xlo, xhi) = x.iter().filter(finite).fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let (ylo, yhi) = ys
        .iter()
        .flat_map(|(_, v)| v.iter())
        .filter(finite)
        .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let (ylo, yhi) = padded(ylo, yhi);
    let err = |e: DrawingAreaErrorKind<DB::ErrorType>| CliError::Plot(e.to_string());

    let mut builder = ChartBuilder::on(area);
    builder
        .caption(&p.title, ("sans-serif", 16))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56);
    let colors = [&BLUE, &RED, &GREEN, &MAGENTA, &CYAN, &BLACK, &RGBColor(230, 140, 0), &RGBColor(120, 70, 20)];

    macro_rules! finish {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart
                .configure_mesh()
                .x_desc(p.x_label.as_str())
                .y_desc(p.y_label.as_str())
                .draw()
                .map_err(err)?;
            for (k, (name, v)) in ys.iter().enumerate() {
                let c = colors[k % colors.len()];
                let pts: Vec<(f64, f64)> = x
                    .iter()
                    .zip(v)
                    .filter(|(a, b)| a.is_finite() && b.is_finite())
                    .map(|(&a, &b)| (a, b))
                    .collect();
                chart
                    .draw_series(LineSeries::new(pts.clone(), c.stroke_width(2)))
                    .map_err(err)?
                    .label(name.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], c.stroke_width(2)));
                chart
                    .draw_series(pts.iter().map(|&(a, b)| Circle::new((a, b), 2, c.filled())))
                    .map_err(err)?;
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.85))
                .border_style(BLACK)
                .draw()
                .map_err(err)?;
        }};
    }

    if p.log_x && xlo > 0.0 {
        let chart = builder
            .build_cartesian_2d((xlo * 0.9..xhi * 1.1).log_scale(), ylo..yhi)
            .map_err(err)?;
        finish!(chart);
    } else {
        let (xlo, xhi) = padded(xlo, xhi);
        let chart = builder.build_cartesian_2d(xlo..xhi, ylo..yhi).map_err(err)?;
        finish!(chart);
    }
    Ok(())
}

/// Renders a figure to an SVG document.
pub fn render(figure: &Figure, tables: &[Table]) -> Result<String, CliError> {
    let mut svg = String::new();
    {
        let n = figure.panels.len().max(1) as u32;
        let root = SVGBackend::with_string(&mut svg, (PANEL_W * n, PANEL_H)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| CliError::Plot(e.to_string()))?;
        let areas = root.split_evenly((1, n as usize));
        for (area, p) in areas.iter().zip(&figure.panels) {
            draw_panel(area, tables, p)?;
        }
        root.present().map_err(|e| CliError::Plot(e.to_string()))?;
    }
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_every_series_name() {
        let mut t = Table::new("curves", &["epoch", "a", "b"]);
        for e in 0..5 {
            t.push(vec![(e as f64).into(), (e as f64).sqrt().into(), (1.0 / (1.0 + e as f64)).into()]);
        }
        let f = Figure::new("fig", vec![Panel::new("demo", "curves", "epoch", &["a", "b"]).labels("epoch", "value")]);
        let svg = render(&f, &[t]).unwrap();
        assert!(svg.starts_with("<svg"));
        let has = |name: &str| svg.lines().any(|l| l.trim() == name);
        assert!(has("a") && has("b") && has("demo"));
    }

    #[test]
    fn missing_column_is_an_error() {
        let t = Table::new("curves", &["epoch"]);
        let f = Figure::new("fig", vec![Panel::new("demo", "curves", "epoch", &["nope"])]);
        assert!(render(&f, &[t]).is_err());
    }
}
