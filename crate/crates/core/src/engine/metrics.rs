use std::io::{self, Write};

use serde::{Deserialize, Serialize};

pub const METRICS_HEADER: &str = "round,global_acc,personal_acc,train_loss,uplink_floats";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub global_acc: f64,
    pub personal_acc: f64,
    pub train_loss: f64,
    pub uplink_floats: usize,
    /// Clients whose algorithm had no personal model yet and were evaluated
    /// with their local model instead.
    pub personal_fallbacks: usize,
}

pub fn write_metrics_csv<W: Write>(mut w: W, rows: &[RoundMetrics]) -> io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for m in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            m.round, m.global_acc, m.personal_acc, m.train_loss, m.uplink_floats
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        let m = RoundMetrics {
            round: 1,
            global_acc: 0.5,
            personal_acc: 0.75,
            train_loss: 0.25,
            uplink_floats: 10,
            personal_fallbacks: 0,
        };
        write_metrics_csv(&mut buf, &[m]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "round,global_acc,personal_acc,train_loss,uplink_floats\n1,0.5,0.75,0.25,10\n"
        );
    }
}
