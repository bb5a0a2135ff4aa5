use std::io::{self, Write};

use super::SweepPoint;

pub const CSV_HEADER: &str = "x_kind,x_value,seed,equalizer,symbols,bit_errors,ber,ser,low_confidence";

/// One row per (point, seed, equalizer), in the order the sweep drivers
/// produce: x ascending, then seed, then equalizer name.
pub fn write_csv<W: Write>(points: &[SweepPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in points {
        for run in &p.runs {
            for o in &run.outcomes {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    p.x_kind.as_str(),
                    p.x_value,
                    run.seed,
                    o.equalizer,
                    o.ber.symbols_total,
                    o.ber.bit_errors,
                    o.ber.ber,
                    o.ber.ser,
                    o.ber.low_confidence()
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{BerResult, EqOutcome, SeedRun, XKind};

    #[test]
    fn csv_layout() {
        let points = vec![SweepPoint {
            x_kind: XKind::SnrDb,
            x_value: f64::INFINITY,
            seeds: vec![2],
            runs: vec![SeedRun {
                seed: 2,
                stream_hash: "h".into(),
                outcomes: vec![EqOutcome {
                    equalizer: "svm_9_3".into(),
                    ber: BerResult::from_counts(3, 2, 100, 4),
                    stream_hash: "h".into(),
                    warnings: vec![],
                }],
            }],
        }];
        let mut buf = Vec::new();
        write_csv(&points, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "snr_db,inf,2,svm_9_3,100,3,0.015,0.02,true");
    }
}
