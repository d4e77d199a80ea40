//! Grouped-bar dimension charts as standalone SVG, one per population, with
//! a `.data` sidecar carrying the exact plotted numbers. The sidecar is the
//! contract; the image is presentation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{fmt2, ReportError, ScoreRow};
use crate::alignment::CountryReference;
use crate::scoring::Dimension;

pub const SIDECAR_HEADER: &str =
    "dimension,score,us_reference,china_reference,us_difference,china_difference";

#[derive(Debug, Clone)]
pub struct PlotPaths {
    pub image: PathBuf,
    pub sidecar: PathBuf,
}

struct Panel {
    x: f64,
    width: f64,
    title: &'static str,
    /// Per dimension: (series value, fill) bars.
    bars: Vec<Vec<(f64, &'static str)>>,
}

const SCORE_FILL: &str = "#4472c4";
const US_FILL: &str = "#9aa5b1";
const CHINA_FILL: &str = "#c0504d";
const US_DIFF_FILL: &str = "#6b7b8c";
const CHINA_DIFF_FILL: &str = "#a03c39";

/// Writes `plots/<population>.svg` and `plots/<population>.data`. The left
/// panel shows the six dimension scores next to both references; the right
/// panel shows the signed differences to each reference.
pub fn emit_dimension_plot(
    row: &ScoreRow,
    us: &CountryReference,
    china: &CountryReference,
    plots_dir: &Path,
) -> Result<PlotPaths, ReportError> {
    std::fs::create_dir_all(plots_dir)
        .map_err(|e| ReportError::Io { path: plots_dir.display().to_string(), source: e })?;
    let label = row.population.label();
    let sidecar = plots_dir.join(format!("{label}.data"));
    let image = plots_dir.join(format!("{label}.svg"));

    let scores = row.scores.as_array();
    let us_values = us.values.as_array();
    let china_values = china.values.as_array();

    let mut data = String::from(SIDECAR_HEADER);
    data.push('\n');
    for (i, dimension) in Dimension::ALL.iter().enumerate() {
        let _ = writeln!(
            data,
            "{},{},{},{},{},{}",
            dimension.name(),
            fmt2(scores[i]),
            fmt2(us_values[i]),
            fmt2(china_values[i]),
            fmt2(scores[i] - us_values[i]),
            fmt2(scores[i] - china_values[i]),
        );
    }
    std::fs::write(&sidecar, &data)
        .map_err(|e| ReportError::Io { path: sidecar.display().to_string(), source: e })?;

    let values_panel = Panel {
        x: 50.0,
        width: 420.0,
        title: "dimension scores vs references",
        bars: (0..6)
            .map(|i| {
                vec![
                    (scores[i], SCORE_FILL),
                    (us_values[i], US_FILL),
                    (china_values[i], CHINA_FILL),
                ]
            })
            .collect(),
    };
    let diff_panel = Panel {
        x: 520.0,
        width: 420.0,
        title: "difference to reference",
        bars: (0..6)
            .map(|i| {
                vec![
                    (scores[i] - us_values[i], US_DIFF_FILL),
                    (scores[i] - china_values[i], CHINA_DIFF_FILL),
                ]
            })
            .collect(),
    };
    let svg = render_svg(&label, &[values_panel, diff_panel]);
    std::fs::write(&image, svg)
        .map_err(|e| ReportError::Io { path: image.display().to_string(), source: e })?;

    Ok(PlotPaths { image, sidecar })
}

fn render_svg(title: &str, panels: &[Panel]) -> String {
    const HEIGHT: f64 = 440.0;
    const TOP: f64 = 60.0;
    const BOTTOM: f64 = 390.0;

    let mut svg = String::new();
    svg.push_str(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"990\" height=\"440\" viewBox=\"0 0 990 440\">\n",
    );
    let _ = writeln!(svg, "<rect width=\"990\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"495\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">{}</text>",
        escape(title)
    );

    for panel in panels {
        // Shared linear scale per panel, padded and always spanning zero.
        let mut low = 0.0f64;
        let mut high = 0.0f64;
        for group in &panel.bars {
            for (value, _) in group {
                low = low.min(*value);
                high = high.max(*value);
            }
        }
        let span = (high - low).max(1.0);
        let low = low - span * 0.05;
        let high = high + span * 0.05;
        let y_of = |value: f64| BOTTOM - (value - low) / (high - low) * (BOTTOM - TOP);

        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"48\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#555\">{}</text>",
            panel.x + panel.width / 2.0,
            escape(panel.title)
        );
        // Zero axis.
        let zero_y = y_of(0.0);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{zero_y:.2}\" x2=\"{:.2}\" y2=\"{zero_y:.2}\" stroke=\"#333\" stroke-width=\"1\"/>",
            panel.x,
            panel.x + panel.width
        );

        let group_width = panel.width / 6.0;
        for (i, dimension) in Dimension::ALL.iter().enumerate() {
            let group_x = panel.x + group_width * i as f64;
            let bars = &panel.bars[i];
            let bar_width = (group_width * 0.8) / bars.len() as f64;
            for (j, (value, fill)) in bars.iter().enumerate() {
                let x = group_x + group_width * 0.1 + bar_width * j as f64;
                let top = y_of(value.max(0.0));
                let bottom = y_of(value.min(0.0));
                let _ = writeln!(
                    svg,
                    "<rect x=\"{x:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"><title>{}: {}</title></rect>",
                    bar_width - 2.0,
                    (bottom - top).max(0.5),
                    dimension.name(),
                    fmt2(*value)
                );
            }
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"410\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
                group_x + group_width / 2.0,
                dimension.name()
            );
        }
    }

    // Legend.
    let legend = [
        ("population", SCORE_FILL),
        ("US reference", US_FILL),
        ("China reference", CHINA_FILL),
        ("minus US", US_DIFF_FILL),
        ("minus China", CHINA_DIFF_FILL),
    ];
    let mut x = 50.0;
    for (name, fill) in legend {
        let _ = writeln!(svg, "<rect x=\"{x:.2}\" y=\"422\" width=\"12\" height=\"12\" fill=\"{fill}\"/>");
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"432\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            x + 16.0,
            name
        );
        x += 24.0 + 8.0 * name.len() as f64;
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
