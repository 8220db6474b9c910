//! Building report tables from run results.

use std::collections::BTreeMap;

use crate::evaluation::{
    p_at_1_by_relation_type, paired_p_value, per_key_p_at_k, Cell, EvalError, EvalReport, GoldSet, KeyedList,
    PRECISION_KS, SIGNIFICANCE,
};
use crate::lexicon::{PerRelation, RelationType};

/// Relation rows (P@1 per relation) for each layer, then the random column.
pub fn probe_report(
    layer_names: &[usize],
    per_layer: &[PerRelation<f64>],
    trials: usize,
    random: Option<&PerRelation<f64>>,
) -> EvalReport {
    let mut columns: Vec<String> = layer_names.iter().map(|l| format!("L{l}")).collect();
    if random.is_some() {
        columns.push("random".into());
    }
    let mut report = EvalReport::new("P@1 by relation", "relation", columns);
    for r in RelationType::ALL {
        let mut cells: Vec<Option<Cell>> = per_layer
            .iter()
            .map(|p| Some(Cell::proportion(p[r], trials)))
            .collect();
        if let Some(rand) = random {
            cells.push(Some(Cell::proportion(rand[r], trials)));
        }
        report.push_row(r.label(), cells);
    }
    report
}

/// One column of a rerank table.
#[derive(Debug, Clone)]
pub struct RerankTableInput {
    pub label: String,
    pub lists: Vec<KeyedList>,
    /// Lists the column is tested against, key by key.
    pub reference: Option<Vec<KeyedList>>,
}

fn relation_indicator(lists: &[KeyedList], gold: &GoldSet, r: RelationType) -> BTreeMap<String, f64> {
    lists
        .iter()
        .filter(|(k, _)| gold.contains_key(k))
        .map(|(k, words)| {
            let hit = words.first().is_some_and(|w| gold.labels(k, w).contains(&r));
            (k.clone(), if hit { 1.0 } else { 0.0 })
        })
        .collect()
}

/// P@1, P@2, P@5 and P@1 per relation, one column per input.
pub fn rerank_report(title: &str, columns: &[RerankTableInput], gold: &GoldSet) -> Result<EvalReport, EvalError> {
    let mut report = EvalReport::new(title, "metric", columns.iter().map(|c| c.label.clone()).collect());
    type Scorer<'a> = Box<dyn Fn(&[KeyedList]) -> BTreeMap<String, f64> + 'a>;
    let mut rows: Vec<(String, Scorer<'_>)> = Vec::new();
    for k in PRECISION_KS {
        rows.push((format!("P@{k}"), Box::new(move |l: &[KeyedList]| per_key_p_at_k(l, gold, k))));
    }
    for r in RelationType::WORDNET {
        rows.push((r.label().to_owned(), Box::new(move |l: &[KeyedList]| relation_indicator(l, gold, r))));
    }
    for (label, scorer) in rows {
        let mut cells = Vec::with_capacity(columns.len());
        for col in columns {
            let per_key = scorer(&col.lists);
            let n = per_key.len();
            let mean = if n == 0 { 0.0 } else { per_key.values().sum::<f64>() / n as f64 };
            let mut cell = Cell::proportion(mean, n);
            if let Some(reference) = &col.reference {
                if let Some(p) = paired_p_value(&per_key, &scorer(reference))? {
                    cell = cell.compared(p, SIGNIFICANCE);
                }
            }
            cells.push(Some(cell));
        }
        report.push_row(label, cells);
    }
    if let Some(first) = columns.first() {
        let cov = p_at_1_by_relation_type(&first.lists, gold);
        report.counts.insert("keys_evaluated".into(), cov.evaluated);
        report.counts.insert("keys_without_gold".into(), cov.skipped);
    }
    Ok(report)
}
