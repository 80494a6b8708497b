use std::fmt::Write as _;

/// Scores of one evaluated sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleScore {
    pub id: u64,
    pub dice: f64,
    pub iou: f64,
}

/// Per-sample Dice / IoU with aggregate statistics. Both-empty masks score 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub threshold: f64,
    pub samples: Vec<SampleScore>,
}

fn mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count();
    if n == 0 {
        return f64::NAN;
    }
    xs.sum::<f64>() / n as f64
}

/// Population standard deviation.
fn std(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = mean(xs.clone());
    mean(xs.map(|x| (x - m) * (x - m))).sqrt()
}

impl EvalReport {
    pub fn mean_dice(&self) -> f64 {
        mean(self.samples.iter().map(|s| s.dice))
    }

    pub fn std_dice(&self) -> f64 {
        std(self.samples.iter().map(|s| s.dice))
    }

    pub fn mean_iou(&self) -> f64 {
        mean(self.samples.iter().map(|s| s.iou))
    }

    pub fn std_iou(&self) -> f64 {
        std(self.samples.iter().map(|s| s.iou))
    }

    /// Machine-readable form: one `sample_id<TAB>dice<TAB>iou` line per sample.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            let _ = writeln!(out, "{}\t{}\t{}", s.id, s.dice, s.iou);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>10}  {:>8}  {:>8}", "sample", "dice", "iou");
        for s in &self.samples {
            let _ = writeln!(out, "{:>10}  {:>8.4}  {:>8.4}", s.id, s.dice, s.iou);
        }
        let _ = writeln!(
            out,
            "{:>10}  {:>8.4}  {:>8.4}\n{:>10}  {:>8.4}  {:>8.4}\nthreshold {}",
            "mean",
            self.mean_dice(),
            self.mean_iou(),
            "std",
            self.std_dice(),
            self.std_iou(),
            self.threshold
        );
        out
    }
}
