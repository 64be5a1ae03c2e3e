use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::metrics::{summarize, MetricsSummary};
use super::run::REPORT_DIR;
use super::HarnessError;

type Series<'a> = (&'a str, RGBColor, Vec<(f64, f64)>);

fn plot(path: &Path, title: &str, y_label: &str, series: &[Series<'_>]) -> Result<(), HarnessError> {
    let fail = |e: &dyn std::fmt::Display| HarnessError::Plot(format!("{}: {e}", path.display()));
    let points = series.iter().flat_map(|(_, _, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = ((y1 - y0) * 0.05).max(1e-3);
    let root = SVGBackend::new(path, (720, 400)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| fail(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1.max(x0 + 1.0), (y0 - pad)..(y1 + pad))
        .map_err(|e| fail(&e))?;
    chart
        .configure_mesh()
        .x_desc("round")
        .y_desc(y_label)
        .draw()
        .map_err(|e| fail(&e))?;
    for (name, color, data) in series {
        let color = *color;
        chart
            .draw_series(LineSeries::new(data.iter().copied(), color.stroke_width(2)))
            .map_err(|e| fail(&e))?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        chart
            .draw_series(data.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(|e| fail(&e))?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| fail(&e))?;
    root.present().map_err(|e| fail(&e))
}

/// Summary plus the static plots, written under `report/` in `dir`.
pub fn report(dir: &Path) -> Result<(MetricsSummary, Vec<PathBuf>), HarnessError> {
    let summary = summarize(dir)?;
    let out = dir.join(REPORT_DIR);
    fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
    let rounds: Vec<f64> = summary.per_round.iter().map(|r| r.round as f64).collect();
    let zip = |ys: Vec<Option<f64>>| -> Vec<(f64, f64)> {
        rounds.iter().zip(ys).filter_map(|(&x, y)| y.map(|y| (x, y))).collect()
    };

    let fe = out.join("free_energy.svg");
    let f = zip(summary.free_energy.iter().map(|&v| Some(v)).collect());
    plot(&fe, "Free energy", "F (nats, summed over nodes)", &[("agent", BLUE, f)])?;

    let det = out.join("detection.svg");
    let detected = zip(summary.per_round.iter().map(|r| Some(r.detected as f64)).collect());
    let active = zip(summary.per_round.iter().map(|r| Some(r.active as f64)).collect());
    plot(&det, "Detection timeline", "(node, fault) pairs", &[("believed active", RED, detected), ("truly active", BLACK, active)])?;

    let dl = out.join("deadline.svg");
    let agent = zip(summary.per_round.iter().map(|r| r.hit_rate).collect());
    let base = zip(summary.per_round.iter().map(|r| r.baseline_hit_rate).collect());
    plot(&dl, "Deadline-hit rate", "cumulative hit rate", &[("agent", BLUE, agent), ("do-nothing", RED, base)])?;

    Ok((summary, vec![fe, det, dl]))
}
