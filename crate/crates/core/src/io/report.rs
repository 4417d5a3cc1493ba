use std::fmt::Write as _;
use std::io::Write;

use crate::error::IoError;
use crate::evaluation::MetricReport;
use crate::sim::SweepRow;

pub const SWEEP_HEADER: &str = "axis_value,pipeline,map,ap50,ap75,lrp,lrp_loc,lrp_fp,lrp_fn,loc_miou,cls_acc";

/// Header plus one row per sweep entry, metrics at six decimals.
pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> Result<(), IoError> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for row in rows {
        let r = &row.report;
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            row.value,
            row.pipeline.name(),
            r.map,
            r.ap50,
            r.ap75,
            r.lrp,
            r.lrp_loc,
            r.lrp_fp,
            r.lrp_fn,
            r.loc_miou,
            r.cls_acc
        )?;
    }
    Ok(())
}

fn opt(v: Option<f64>, scale: f64, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{:.*}", digits, x * scale))
}

/// Aligned table (percentages) followed by `key=value` lines (fractions).
pub fn render_report(r: &MetricReport) -> String {
    let rows: Vec<(&str, String)> = vec![
        ("mAP", opt(Some(r.map), 100.0, 2)),
        ("AP50", opt(Some(r.ap50), 100.0, 2)),
        ("AP75", opt(Some(r.ap75), 100.0, 2)),
        ("APs", opt(r.ap_size.small, 100.0, 2)),
        ("APm", opt(r.ap_size.medium, 100.0, 2)),
        ("APl", opt(r.ap_size.large, 100.0, 2)),
        ("oLRP", opt(Some(r.lrp), 100.0, 2)),
        ("oLRP loc", if r.lrp_loc_undefined { "n/a".into() } else { opt(Some(r.lrp_loc), 100.0, 2) }),
        ("oLRP FP", opt(Some(r.lrp_fp), 100.0, 2)),
        ("oLRP FN", opt(Some(r.lrp_fn), 100.0, 2)),
        ("loc mIoU", opt(Some(r.loc_miou), 100.0, 2)),
        ("cls acc", opt(Some(r.cls_acc), 100.0, 2)),
    ];
    let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    let val_w = rows.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{:<name_w$}  {:>val_w$}", "metric", "value");
    for (name, value) in &rows {
        let _ = writeln!(out, "{name:<name_w$}  {value:>val_w$}");
    }
    out.push('\n');
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    kv("map", format!("{:.6}", r.map));
    kv("ap50", format!("{:.6}", r.ap50));
    kv("ap75", format!("{:.6}", r.ap75));
    for (t, ap) in &r.ap_at {
        kv(&format!("ap@{t:.2}"), format!("{ap:.6}"));
    }
    kv("ap_small", opt(r.ap_size.small, 1.0, 6));
    kv("ap_medium", opt(r.ap_size.medium, 1.0, 6));
    kv("ap_large", opt(r.ap_size.large, 1.0, 6));
    kv("lrp", format!("{:.6}", r.lrp));
    kv("lrp_loc", format!("{:.6}", r.lrp_loc));
    kv("lrp_fp", format!("{:.6}", r.lrp_fp));
    kv("lrp_fn", format!("{:.6}", r.lrp_fn));
    kv("lrp_loc_undefined", r.lrp_loc_undefined.to_string());
    kv("loc_miou", format!("{:.6}", r.loc_miou));
    kv("cls_acc", format!("{:.6}", r.cls_acc));
    kv("no_matches", r.no_matches.to_string());
    out
}
