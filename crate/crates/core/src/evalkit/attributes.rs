use std::fmt::{self, Write};
use std::str::FromStr;

use super::EvalError;

/// Benchmark challenge tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attribute {
    IV,
    OPR,
    SV,
    OCC,
    DEF,
    MB,
    FM,
    IPR,
    OV,
    BC,
    LR,
}

impl Attribute {
    pub const ALL: [Attribute; 11] = [
        Attribute::IV,
        Attribute::OPR,
        Attribute::SV,
        Attribute::OCC,
        Attribute::DEF,
        Attribute::MB,
        Attribute::FM,
        Attribute::IPR,
        Attribute::OV,
        Attribute::BC,
        Attribute::LR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::IV => "Illumination variation",
            Attribute::OPR => "Out-of-plane rotation",
            Attribute::SV => "Scale variation",
            Attribute::OCC => "Occlusion",
            Attribute::DEF => "Deformation",
            Attribute::MB => "Motion blur",
            Attribute::FM => "Fast motion",
            Attribute::IPR => "In-plane rotation",
            Attribute::OV => "Out of view",
            Attribute::BC => "Background clutter",
            Attribute::LR => "Low resolution",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Attribute {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Attribute::ALL
            .into_iter()
            .find(|a| a.to_string().eq_ignore_ascii_case(t))
            .ok_or_else(|| EvalError::Parse(format!("unknown attribute {t:?}")))
    }
}

/// Parses a comma/whitespace separated tag list.
pub fn parse_tags(s: &str) -> Result<Vec<Attribute>, EvalError> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceScore {
    pub name: String,
    pub score: f64,
    pub tags: Vec<Attribute>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeRow {
    pub attribute: Attribute,
    pub count: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTable {
    pub rows: Vec<AttributeRow>,
    /// Row means weighted by their sequence counts.
    pub weighted_average: f64,
}

/// Mean score per attribute over the sequences tagged with it. Untagged
/// sequences contribute to no row.
pub fn attribute_table(scores: &[SequenceScore]) -> AttributeTable {
    let mut rows = Vec::new();
    for attribute in Attribute::ALL {
        let tagged: Vec<f64> = scores
            .iter()
            .filter(|s| s.tags.contains(&attribute))
            .map(|s| s.score)
            .collect();
        if tagged.is_empty() {
            continue;
        }
        rows.push(AttributeRow {
            attribute,
            count: tagged.len(),
            mean: tagged.iter().sum::<f64>() / tagged.len() as f64,
        });
    }
    let total: usize = rows.iter().map(|r| r.count).sum();
    let weighted_average = if total == 0 {
        0.0
    } else {
        rows.iter().map(|r| r.count as f64 * r.mean).sum::<f64>() / total as f64
    };
    AttributeTable { rows, weighted_average }
}

impl AttributeTable {
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.attribute.name().len() + 6).max().unwrap_or(0).max(16);
        let mut s = String::new();
        for r in &self.rows {
            let label = format!("{} ({})", r.attribute.name(), r.count);
            let _ = writeln!(s, "{label:<width$}  {:.3}", r.mean);
        }
        let _ = writeln!(s, "{:<width$}  {:.3}", "Weighted average", self.weighted_average);
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("attribute,count,score\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.attribute, r.count, r.mean);
        }
        let total: usize = self.rows.iter().map(|r| r.count).sum();
        let _ = writeln!(s, "weighted,{total},{}", self.weighted_average);
        s
    }
}
