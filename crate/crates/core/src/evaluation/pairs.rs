use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Identity of one captured clip.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClipRef {
    pub chip_id: String,
    pub clip_id: String,
}

impl ClipRef {
    pub fn new(chip_id: impl Into<String>, clip_id: impl Into<String>) -> Self {
        Self {
            chip_id: chip_id.into(),
            clip_id: clip_id.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Matched,
    Unmatched,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Matched => "matched",
            Label::Unmatched => "unmatched",
        }
    }
}

/// A test/reference pair given as indices into the clip list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSpec {
    pub test: usize,
    pub reference: usize,
    pub label: Label,
}

/// Every unordered pair of distinct clips; matched when both come from the
/// same chip. Needs two chips and at least one chip with two clips.
pub fn enumerate_pairs(clips: &[ClipRef]) -> Result<Vec<PairSpec>> {
    for (i, a) in clips.iter().enumerate() {
        if clips[..i].contains(a) {
            return Err(Error::InvalidParameter(alloc::format!(
                "duplicate clip {}/{}",
                a.chip_id,
                a.clip_id
            )));
        }
    }
    let mut pairs = Vec::new();
    for i in 0..clips.len() {
        for j in i + 1..clips.len() {
            let label = if clips[i].chip_id == clips[j].chip_id {
                Label::Matched
            } else {
                Label::Unmatched
            };
            pairs.push(PairSpec {
                test: i,
                reference: j,
                label,
            });
        }
    }
    let matched = pairs.iter().filter(|p| p.label == Label::Matched).count();
    if matched == 0 || matched == pairs.len() {
        return Err(Error::InsufficientData(
            "need at least two chips and two clips of one chip".into(),
        ));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn dataset(chips: usize, clips: usize) -> Vec<ClipRef> {
        (0..chips)
            .flat_map(|c| (0..clips).map(move |k| ClipRef::new(format!("chip{c}"), format!("clip{k}"))))
            .collect()
    }

    fn counts(p: &[PairSpec]) -> (usize, usize) {
        let m = p.iter().filter(|p| p.label == Label::Matched).count();
        (m, p.len() - m)
    }

    #[test]
    fn pair_counts() {
        assert_eq!(counts(&enumerate_pairs(&dataset(8, 3)).unwrap()), (24, 252));
        assert_eq!(counts(&enumerate_pairs(&dataset(2, 2)).unwrap()), (2, 4));
        assert!(enumerate_pairs(&dataset(1, 3)).is_err());
        assert!(enumerate_pairs(&dataset(4, 1)).is_err());
    }

    #[test]
    fn no_self_pairs_and_labels_follow_chip() {
        let d = dataset(3, 3);
        for p in enumerate_pairs(&d).unwrap() {
            assert_ne!(p.test, p.reference);
            assert_eq!(p.label == Label::Matched, d[p.test].chip_id == d[p.reference].chip_id);
        }
        let mut dup = d.clone();
        dup.push(d[0].clone());
        assert!(enumerate_pairs(&dup).is_err());
    }
}
