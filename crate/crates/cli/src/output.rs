//! CSV, manifest and SVG writers. Every file is written atomically.

use std::path::Path;

use qrobust::ansatz::checkpoint::write_atomic;

use crate::CliError;

pub const HISTORY_HEADER: [&str; 4] = ["epoch", "train_loss", "val_loss", "val_acc"];
pub const SWEEP_HEADER: [&str; 6] = ["epsilon", "depol_p", "adv_accuracy", "n_samples", "attack_kind", "steps"];
pub const CERTIFICATE_PREFIX: [&str; 6] = ["sample_id", "true_class", "pred_class", "y_C", "y_k", "eps_min"];

pub fn tau_column(p: f64) -> String {
    format!("tau_D_p={p}")
}

/// Renders `rows` under `header` and writes the result atomically.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Config(format!("csv encoding: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv encoding: {e}")))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// Static line plot, one polyline per labelled series of `(x, y)` points.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 420.0, 70.0, 150.0, 40.0, 55.0);
    let xs = series.iter().flat_map(|(_, s)| s.iter().map(|p| p.0));
    let (x_min, x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (x_min, x_max) = if x_min < x_max { (x_min, x_max) } else { (x_min - 0.5, x_min + 0.5) };
    let (y_min, y_max) = (0.0, 1.0);
    let px = |x: f64| left + (x - x_min) / (x_max - x_min) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y_min) / (y_max - y_min) * (h - top - bottom);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        (w - right + left) / 2.0,
        escape(title)
    );
    svg += &format!(
        "<line x1=\"{left}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - bottom,
        w - right
    );
    for k in 0..=4 {
        let fx = x_min + (x_max - x_min) * k as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * k as f64 / 4.0;
        svg += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            px(fx),
            h - bottom + 18.0,
            trim(fx)
        );
        svg += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            left - 6.0,
            py(fy) + 4.0,
            trim(fy)
        );
        svg += &format!(
            "<line x1=\"{left}\" y1=\"{0:.1}\" x2=\"{1:.1}\" y2=\"{0:.1}\" stroke=\"#ddd\"/>\n",
            py(fy),
            w - right
        );
    }
    svg += &format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        (w - right + left) / 2.0,
        h - 12.0,
        escape(x_label)
    );
    svg += &format!(
        "<text x=\"18\" y=\"{0:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0:.1})\">{1}</text>\n",
        (h - bottom + top) / 2.0,
        escape(y_label)
    );
    for (i, (label, pts)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        svg += &format!(
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\" points=\"{}\"/>\n",
            points.join(" ")
        );
        let ly = top + 18.0 * i as f64 + 10.0;
        svg += &format!(
            "<line x1=\"{0:.1}\" y1=\"{ly:.1}\" x2=\"{1:.1}\" y2=\"{ly:.1}\" stroke=\"{colour}\" stroke-width=\"2\"/>\n<text x=\"{2:.1}\" y=\"{3:.1}\">{4}</text>\n",
            w - right + 15.0,
            w - right + 35.0,
            w - right + 40.0,
            ly + 4.0,
            escape(label)
        );
    }
    svg += "</svg>\n";
    svg
}

fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let header: Vec<String> = HISTORY_HEADER.iter().map(|s| s.to_string()).collect();
        write_csv(&path, &header, &[vec!["0".into(), "0.5".into(), "0.4".into(), "1".into()]]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "epoch,train_loss,val_loss,val_acc\n0,0.5,0.4,1\n");
        assert_eq!(tau_column(0.1), "tau_D_p=0.1");
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let s = line_plot_svg(
            "t",
            "x",
            "y",
            &[("a".into(), vec![(0.0, 1.0), (0.1, 0.5)]), ("b".into(), vec![(0.0, 0.9), (0.1, 0.2)])],
        );
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(!s.contains("{}"));
    }
}
