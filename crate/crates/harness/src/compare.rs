use std::fmt::Write as _;
use std::io::Write;

use crate::eval::EvalReport;
use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Increase,
    Tie,
    Decrease,
}

impl Step {
    fn name(self) -> &'static str {
        match self {
            Step::Increase => "increase",
            Step::Tie => "tie",
            Step::Decrease => "decrease",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub dice_mean: f64,
    pub dice_std: f64,
    pub hd95_mean: f64,
    pub hd95_std: f64,
    /// Dice relation to the previous row; `None` for the first row.
    pub step: Option<Step>,
}

/// Reports ordered zeroshot, vpt, baps (stable within a mode).
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Dice never decreases along the expected ordering.
    pub ordering_holds: bool,
}

pub fn compare(reports: &[EvalReport]) -> Result<Comparison, HarnessError> {
    if reports.len() < 2 {
        return Err(HarnessError::Config("compare needs at least two reports".into()));
    }
    let fp = &reports[0].dataset_fingerprint;
    if let Some(r) = reports.iter().find(|r| &r.dataset_fingerprint != fp) {
        return Err(HarnessError::Data(format!(
            "report {} was evaluated on a different dataset",
            r.label()
        )));
    }
    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.mode.rank());

    let mut rows: Vec<ComparisonRow> = Vec::with_capacity(sorted.len());
    for r in sorted {
        let step = rows.last().map(|prev| {
            if r.dice_mean > prev.dice_mean {
                Step::Increase
            } else if r.dice_mean == prev.dice_mean {
                Step::Tie
            } else {
                Step::Decrease
            }
        });
        rows.push(ComparisonRow {
            label: r.label(),
            dice_mean: r.dice_mean,
            dice_std: r.dice_std,
            hd95_mean: r.hd95_mean,
            hd95_std: r.hd95_std,
            step,
        });
    }
    let ordering_holds = rows.iter().all(|r| r.step != Some(Step::Decrease));
    Ok(Comparison { rows, ordering_holds })
}

impl Comparison {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "method",
            "dice_mean",
            "dice_std",
            "hd95_mean",
            "hd95_std",
            "dice_vs_previous",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                r.dice_mean.to_string(),
                r.dice_std.to_string(),
                r.hd95_mean.to_string(),
                r.hd95_std.to_string(),
                r.step.map(Step::name).unwrap_or("").to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<20} {:>16} {:>16}  vs previous", "method", "DSC", "HD95");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<20} {:>7.4} ± {:<6.4} {:>7.3} ± {:<6.3}  {}",
                r.label,
                r.dice_mean,
                r.dice_std,
                r.hd95_mean,
                r.hd95_std,
                r.step.map(Step::name).unwrap_or("-")
            );
        }
        let verdict = if self.ordering_holds { "holds" } else { "violated" };
        let _ = writeln!(s, "expected ordering zeroshot <= vpt <= baps: {verdict}");
        s
    }
}
