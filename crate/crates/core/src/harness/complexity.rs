use super::EvalError;
use crate::tensor_io::ModelRecord;

/// Contiguous window of `window` models out of the pool sorted by ascending
/// parameter count (ties by `model_id`). Level 1 is the lightest window and
/// level `levels` the heaviest; intermediate levels start at
/// `round((level-1)(M-window)/(levels-1))`.
pub fn complexity_subset<'a>(
    models: &'a [ModelRecord],
    level: usize,
    levels: usize,
    window: usize,
) -> Result<Vec<&'a ModelRecord>, EvalError> {
    if levels == 0 || level == 0 || level > levels {
        return Err(EvalError::BadLevel { level, levels });
    }
    let m = models.len();
    if window == 0 || window > m {
        return Err(EvalError::WindowTooLarge { window, models: m });
    }
    let mut sorted: Vec<&ModelRecord> = models.iter().collect();
    sorted.sort_by(|a, b| a.param_count.cmp(&b.param_count).then_with(|| a.model_id.cmp(&b.model_id)));
    let offset = if levels == 1 {
        0
    } else {
        // round half up on exact integers
        let num = (level - 1) * (m - window);
        let den = levels - 1;
        (2 * num + den) / (2 * den)
    };
    Ok(sorted[offset..offset + window].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    pub(crate) fn pool(counts: &[u64]) -> Vec<ModelRecord> {
        counts
            .iter()
            .enumerate()
            .map(|(i, &p)| ModelRecord {
                model_id: format!("m{i:02}"),
                source_dataset: "src".into(),
                param_count: p,
                feature_paths: BTreeMap::new(),
                logit_paths: BTreeMap::new(),
                head_weight_path: None,
                head_bias_path: None,
                snapshot_paths: BTreeMap::new(),
            })
            .collect()
    }

    fn ranks(sel: &[&ModelRecord], all: &[ModelRecord]) -> Vec<usize> {
        let mut sorted: Vec<u64> = all.iter().map(|m| m.param_count).collect();
        sorted.sort();
        sel.iter().map(|m| sorted.iter().position(|&p| p == m.param_count).unwrap() + 1).collect()
    }

    #[test]
    fn eleven_models_window_seven() {
        let models = pool(&[44, 21, 8, 25, 60, 3, 14, 5, 7, 27, 20]);
        let expect = [(1, 1..=7), (2, 2..=8), (3, 3..=9), (4, 4..=10), (5, 5..=11)];
        for (level, range) in expect {
            let sel = complexity_subset(&models, level, 5, 7).unwrap();
            assert_eq!(ranks(&sel, &models), range.collect::<Vec<_>>(), "level {level}");
        }
    }

    #[test]
    fn single_level_is_lightest() {
        let models = pool(&[5, 1, 3]);
        let sel = complexity_subset(&models, 1, 1, 2).unwrap();
        assert_eq!(ranks(&sel, &models), vec![1, 2]);
    }

    #[test]
    fn ties_broken_by_id() {
        let models = pool(&[5, 5, 5]);
        let sel = complexity_subset(&models, 2, 2, 2).unwrap();
        let ids: Vec<&str> = sel.iter().map(|m| m.model_id.as_str()).collect();
        assert_eq!(ids, ["m01", "m02"]);
    }

    #[test]
    fn errors() {
        let models = pool(&[1, 2, 3]);
        assert!(matches!(complexity_subset(&models, 0, 5, 2), Err(EvalError::BadLevel { .. })));
        assert!(matches!(complexity_subset(&models, 6, 5, 2), Err(EvalError::BadLevel { .. })));
        assert!(matches!(complexity_subset(&models, 1, 5, 4), Err(EvalError::WindowTooLarge { .. })));
    }
}
