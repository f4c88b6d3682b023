use std::sync::OnceLock;

use crate::decoder::CHANNELS;

const MONTAGE_FILE: &str = include_str!("../../data/montage64.txt");

/// Channel labels in index order, from `data/montage64.txt`.
pub fn montage() -> &'static [&'static str] {
    static LABELS: OnceLock<Vec<&'static str>> = OnceLock::new();
    LABELS.get_or_init(|| {
        let labels: Vec<&'static str> = MONTAGE_FILE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        assert_eq!(labels.len(), CHANNELS, "montage file must list {CHANNELS} channels");
        labels
    })
}

pub fn channel_index(label: &str) -> Option<usize> {
    montage().iter().position(|l| l.eq_ignore_ascii_case(label))
}

pub fn channel_label(index: usize) -> Option<&'static str> {
    montage().get(index).copied()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_unique_and_indexed() {
        let m = montage();
        let mut sorted = m.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), CHANNELS);
        assert_eq!(channel_index("TP10"), Some(20));
        assert_eq!(channel_index("cp5"), Some(10));
        assert_eq!(channel_label(23), Some("Cz"));
        assert_eq!(channel_index("Xx9"), None);
    }
}
