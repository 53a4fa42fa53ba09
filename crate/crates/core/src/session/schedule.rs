use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Factor levels of the experiment. Roll and correction vary within subject;
/// each subject sees one pitch-yaw pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionGrid {
    pub roll_levels: Vec<f64>,
    pub pitch_yaw_pairs: Vec<(f64, f64)>,
    pub correction_levels: Vec<bool>,
    pub repetitions: u32,
}

impl Default for ConditionGrid {
    fn default() -> Self {
        ConditionGrid {
            roll_levels: (0..8).map(|k| 45.0 * k as f64).collect(),
            pitch_yaw_pairs: vec![(0.0, 0.0), (0.0, 45.0), (45.0, 0.0), (45.0, 45.0)],
            correction_levels: vec![false, true],
            repetitions: 3,
        }
    }
}

impl ConditionGrid {
    pub fn validate(&self) -> Result<()> {
        if self.roll_levels.is_empty()
            || self.pitch_yaw_pairs.is_empty()
            || self.correction_levels.is_empty()
        {
            return Err(Error::invalid("condition grid has an empty factor"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        let finite = self.roll_levels.iter().all(|r| r.is_finite())
            && self
                .pitch_yaw_pairs
                .iter()
                .all(|(p, y)| p.is_finite() && y.is_finite());
        if !finite {
            return Err(Error::invalid("condition angles must be finite"));
        }
        let mut rolls = self.roll_levels.clone();
        rolls.sort_by(f64::total_cmp);
        let mut pairs = self.pitch_yaw_pairs.clone();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut corr = self.correction_levels.clone();
        corr.sort();
        if rolls.windows(2).any(|w| w[0] == w[1])
            || pairs.windows(2).any(|w| w[0] == w[1])
            || corr.windows(2).any(|w| w[0] == w[1])
        {
            return Err(Error::invalid("condition grid has repeated levels"));
        }
        Ok(())
    }

    /// Within-subject cells `(roll, correction)` in factor order.
    pub fn cells(&self) -> Vec<(f64, bool)> {
        self.roll_levels
            .iter()
            .flat_map(|&r| self.correction_levels.iter().map(move |&c| (r, c)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub subject: u32,
    pub trial_index: u32,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub correction: bool,
    /// 1-based.
    pub repetition: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub seed: u64,
    pub entries: Vec<ScheduleEntry>,
}

/// Rows of a Williams design for `n` treatments: every row is a permutation and
/// every ordered adjacent pair occurs equally often (once for even `n`, twice
/// for odd `n`, which needs `2n` rows).
pub fn williams_square(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![];
    }
    let mut first = Vec::with_capacity(n);
    let (mut lo, mut hi) = (0usize, n);
    for k in 0..n {
        if k % 2 == 0 {
            first.push(lo);
            lo += 1;
        } else {
            hi -= 1;
            first.push(hi);
        }
    }
    let mut rows: Vec<Vec<usize>> = (0..n)
        .map(|i| first.iter().map(|&x| (x + i) % n).collect())
        .collect();
    if n % 2 == 1 {
        let reversed: Vec<Vec<usize>> = rows
            .iter()
            .map(|r| r.iter().rev().copied().collect())
            .collect();
        rows.extend(reversed);
    }
    rows
}

/// Counterbalanced per-subject trial order. Subject `s` gets pitch-yaw pair
/// `s mod G` and Williams row `s mod rows`; the seed decides which cell each
/// Williams symbol stands for. Repetitions replay the row as further blocks.
pub fn build_schedule(grid: &ConditionGrid, n_subjects: u32, seed: u64) -> Result<Schedule> {
    grid.validate()?;
    if n_subjects == 0 {
        return Err(Error::invalid("schedule needs at least one subject"));
    }
    let mut cells = grid.cells();
    cells.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let rows = williams_square(cells.len());
    let mut entries = Vec::new();
    for subject in 0..n_subjects {
        let (pitch, yaw) = grid.pitch_yaw_pairs[subject as usize % grid.pitch_yaw_pairs.len()];
        let row = &rows[subject as usize % rows.len()];
        let mut index = 0;
        for rep in 1..=grid.repetitions {
            for &symbol in row {
                let (roll, correction) = cells[symbol];
                entries.push(ScheduleEntry {
                    subject,
                    trial_index: index,
                    roll_deg: roll,
                    pitch_deg: pitch,
                    yaw_deg: yaw,
                    correction,
                    repetition: rep,
                });
                index += 1;
            }
        }
    }
    Ok(Schedule { seed, entries })
}

impl Schedule {
    pub const TSV_HEADER: &'static str =
        "subject\ttrial_index\troll_deg\tpitch_deg\tyaw_deg\tcorrection\trepetition";

    pub fn write_tsv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", Self::TSV_HEADER)?;
        for e in &self.entries {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.subject,
                e.trial_index,
                e.roll_deg,
                e.pitch_deg,
                e.yaw_deg,
                if e.correction { "wc" } else { "woc" },
                e.repetition
            )?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("schedule TSV is ASCII")
    }
}
