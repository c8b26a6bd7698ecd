//! Text and CSV rendering of comparison tables.

use std::fmt::Write as _;

use crate::metrics::{ComparisonTable, Settling, SignalId, SignalMetrics};

/// Reference two-area step-load results, in table row order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub signal: SignalId,
    pub peak_fd: f64,
    pub peak_sdf: f64,
    pub t_fd_s: f64,
    pub t_sdf_s: f64,
}

pub const REFERENCE_TABLE: [ReferenceRow; 5] = [
    ReferenceRow { signal: SignalId::Angle(0), peak_fd: 0.0043, peak_sdf: 0.0026, t_fd_s: 48.06, t_sdf_s: 23.53 },
    ReferenceRow { signal: SignalId::Angle(1), peak_fd: 0.0047, peak_sdf: 0.0023, t_fd_s: 47.76, t_sdf_s: 18.76 },
    ReferenceRow { signal: SignalId::Freq(0), peak_fd: 0.1093, peak_sdf: 0.0840, t_fd_s: 39.04, t_sdf_s: 24.27 },
    ReferenceRow { signal: SignalId::Freq(1), peak_fd: 0.0983, peak_sdf: 0.0561, t_fd_s: 39.69, t_sdf_s: 24.70 },
    ReferenceRow {
        signal: SignalId::FreqDiff { to: 1, from: 0 },
        peak_fd: 0.1011,
        peak_sdf: 0.0929,
        t_fd_s: 30.15,
        t_sdf_s: 25.02,
    },
];

pub fn reference_row(signal: SignalId) -> Option<&'static ReferenceRow> {
    REFERENCE_TABLE.iter().find(|r| r.signal == signal)
}

/// The reference values as a comparison table.
pub fn reference_comparison() -> ComparisonTable {
    let side = |peak: fn(&ReferenceRow) -> f64, t: fn(&ReferenceRow) -> f64| -> Vec<SignalMetrics> {
        REFERENCE_TABLE
            .iter()
            .map(|r| SignalMetrics { signal: r.signal, peak_deviation: peak(r), transient: Settling::Settled(t(r)) })
            .collect()
    };
    ComparisonTable::new("fd", "sdf_exact", &side(|r| r.peak_fd, |r| r.t_fd_s), &side(|r| r.peak_sdf, |r| r.t_sdf_s))
}

/// Column label for a controller mode label.
pub fn display_label(label: &str) -> String {
    match label {
        "fd" => "FD".into(),
        "sf" => "SF".into(),
        "sdf" | "sdf_exact" => "SDF".into(),
        "sdf_measured" => "SDF-PMU".into(),
        other => other.to_uppercase(),
    }
}

fn percent(v: f64) -> String {
    if v.is_nan() {
        "n/a".into()
    } else {
        format!("{v:.2}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTable {
    pub text: String,
    pub csv: String,
}

/// Renders `cmp` as an aligned text table and a CSV. With `with_reference`,
/// rows that have a reference counterpart get the reference values alongside.
pub fn render_table(cmp: &ComparisonTable, with_reference: bool) -> RenderedTable {
    let (b, t) = (display_label(&cmp.base_label), display_label(&cmp.test_label));
    let mut head = vec![
        "Signal".to_string(),
        format!("Peak({b})"),
        format!("Peak({t})"),
        format!("T({b}) s"),
        format!("T({t}) s"),
        "Improvement %".to_string(),
    ];
    let mut csv_head = vec![
        "signal".to_string(),
        format!("peak_{}", cmp.base_label),
        format!("peak_{}", cmp.test_label),
        format!("t_{}_s", cmp.base_label),
        format!("t_{}_s", cmp.test_label),
        "improvement_pct".to_string(),
    ];
    if with_reference {
        head.extend(["Ref Peak(FD)", "Ref Peak(SDF)", "Ref T(FD) s", "Ref T(SDF) s", "Ref Improvement %"].map(String::from));
        csv_head.extend(
            ["ref_peak_fd", "ref_peak_sdf", "ref_t_fd_s", "ref_t_sdf_s", "ref_improvement_pct"].map(String::from),
        );
    }

    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut csv = csv_head.join(",");
    csv.push('\n');
    for row in &cmp.rows {
        let mut line = vec![
            row.signal.to_string(),
            format!("{:.4}", row.base.peak_deviation),
            format!("{:.4}", row.test.peak_deviation),
            row.base.transient.to_string(),
            row.test.transient.to_string(),
            percent(row.improvement_pct),
        ];
        let _ = write!(
            csv,
            "{},{},{},{},{},{}",
            row.signal.key(),
            row.base.peak_deviation,
            row.test.peak_deviation,
            row.base.transient_time_s(),
            row.test.transient_time_s(),
            row.improvement_pct
        );
        if with_reference {
            match reference_row(row.signal) {
                Some(r) => {
                    let imp = crate::metrics::improvement_pct(r.t_fd_s, r.t_sdf_s);
                    line.extend([
                        format!("{:.4}", r.peak_fd),
                        format!("{:.4}", r.peak_sdf),
                        format!("{:.2}", r.t_fd_s),
                        format!("{:.2}", r.t_sdf_s),
                        format!("{imp:.2}"),
                    ]);
                    let _ = write!(csv, ",{},{},{},{},{imp}", r.peak_fd, r.peak_sdf, r.t_fd_s, r.t_sdf_s);
                }
                None => {
                    line.extend(std::iter::repeat_n("-".to_string(), 5));
                    csv.push_str(",,,,,");
                }
            }
        }
        csv.push('\n');
        cells.push(line);
    }

    let widths: Vec<usize> = (0..head.len())
        .map(|c| cells.iter().map(|l| l[c].chars().count()).chain([head[c].chars().count()]).max().unwrap_or(0))
        .collect();
    let fmt_line = |line: &[String]| -> String {
        let parts: Vec<String> = line
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (s, w))| {
                let pad = w - s.chars().count();
                if c == 0 {
                    format!("{s}{}", " ".repeat(pad))
                } else {
                    format!("{}{s}", " ".repeat(pad))
                }
            })
            .collect();
        parts.join(" | ").trim_end().to_string()
    };
    let mut text = fmt_line(&head);
    text.push('\n');
    text.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    text.push('\n');
    for line in &cells {
        text.push_str(&fmt_line(line));
        text.push('\n');
    }
    RenderedTable { text, csv }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_rows_reproduce_reference_improvements() {
        let cmp = reference_comparison();
        let imp: Vec<f64> = cmp.rows.iter().map(|r| r.improvement_pct).collect();
        for (got, want) in imp.iter().zip([51.04, 60.72, 37.83, 37.77, 17.02]) {
            assert!((got - want).abs() <= 0.01, "{got} vs {want}");
        }
        let text = render_table(&cmp, false).text;
        for want in ["51.04", "60.72", "37.83", "37.77"] {
            assert!(text.contains(want), "{text}");
        }
    }

    #[test]
    fn row_order_and_header() {
        let r = render_table(&reference_comparison(), false);
        let lines: Vec<&str> = r.text.lines().collect();
        assert!(lines[0].starts_with("Signal"));
        assert!(lines[0].contains("Peak(FD) | Peak(SDF) | T(FD) s | T(SDF) s | Improvement %"));
        let order: Vec<&str> = lines[2..].iter().map(|l| l.split(" |").next().unwrap().trim()).collect();
        assert_eq!(order, ["Δδ1 (rad)", "Δδ2 (rad)", "Δf1 (Hz)", "Δf2 (Hz)", "Δf21 (Hz)"]);
        let csv: Vec<&str> = r.csv.lines().collect();
        assert_eq!(csv[0], "signal,peak_fd,peak_sdf_exact,t_fd_s,t_sdf_exact_s,improvement_pct");
        assert!(csv[5].starts_with("f_21,0.1011,0.0929,30.15,25.02,"));
    }

    #[test]
    fn single_signal_table() {
        let mut cmp = reference_comparison();
        cmp.rows.truncate(1);
        let r = render_table(&cmp, true);
        assert_eq!(r.text.lines().count(), 3);
        assert_eq!(r.csv.lines().count(), 2);
        assert!(r.text.lines().nth(2).unwrap().ends_with("51.04"));
    }

    #[test]
    fn undefined_improvement_prints_na() {
        let mut cmp = reference_comparison();
        cmp.rows[0].improvement_pct = f64::NAN;
        assert!(render_table(&cmp, false).text.lines().nth(2).unwrap().ends_with("n/a"));
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut cmp = reference_comparison();
        cmp.rows.clear();
        let r = render_table(&cmp, false);
        assert_eq!(r.text.lines().count(), 2);
        assert_eq!(r.csv.lines().count(), 1);
    }

    #[test]
    fn unmatched_reference_rows_are_dashed() {
        let mut cmp = reference_comparison();
        cmp.rows[0].signal = SignalId::Angle(2);
        let r = render_table(&cmp, true);
        assert!(r.text.lines().nth(2).unwrap().trim_end().ends_with('-'));
        assert!(r.csv.lines().nth(1).unwrap().ends_with(",,,,,"));
    }
}
