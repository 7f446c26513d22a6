use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{DatasetManifest, Layout, Split};

/// Page and reference counts for one layout across the three splits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StatsRow {
    pub pages: [usize; 3],
    pub refs: [usize; 3],
}

impl StatsRow {
    fn add(&mut self, other: &StatsRow) {
        for i in 0..3 {
            self.pages[i] += other.pages[i];
            self.refs[i] += other.refs[i];
        }
    }

    pub fn pages_in(&self, split: Split) -> usize {
        self.pages[split as usize]
    }

    pub fn refs_in(&self, split: Split) -> usize {
        self.refs[split as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitStats {
    pub name: String,
    /// Only layouts that occur in the manifest.
    pub by_layout: BTreeMap<Layout, StatsRow>,
    pub total: StatsRow,
}

impl SplitStats {
    pub fn pages(&self, split: Split) -> usize {
        self.total.pages_in(split)
    }

    pub fn refs(&self, split: Split) -> usize {
        self.total.refs_in(split)
    }

    pub fn layout(&self, layout: Layout) -> StatsRow {
        self.by_layout.get(&layout).copied().unwrap_or_default()
    }
}

pub fn split_stats(m: &DatasetManifest) -> SplitStats {
    let mut by_layout: BTreeMap<Layout, StatsRow> = BTreeMap::new();
    for (split, page) in m.splits.iter() {
        let row = by_layout.entry(page.layout).or_default();
        row.pages[split as usize] += 1;
        row.refs[split as usize] += page.boxes.len();
    }
    let mut total = StatsRow::default();
    for row in by_layout.values() {
        total.add(row);
    }
    SplitStats {
        name: m.name.clone(),
        by_layout,
        total,
    }
}

impl fmt::Display for SplitStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Dataset: {}", self.name)?;
        writeln!(
            f,
            "{:<16} {:>10} {:>10} {:>10}",
            "", "Train", "Validation", "Test"
        )?;
        let mut line = |label: &str, v: [usize; 3]| {
            writeln!(f, "{label:<16} {:>10} {:>10} {:>10}", v[0], v[1], v[2])
        };
        line("No. of Images", self.total.pages)?;
        line("References", self.total.refs)?;
        for (layout, row) in &self.by_layout {
            line(layout.label(), row.pages)?;
        }
        Ok(())
    }
}
