//! Batch manager: order pending circuits and pick the ones to place this round.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::analysis::{BatchWeights, MetricTerms};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchOrder {
    /// Largest metric first.
    #[default]
    Descending,
    Ascending,
    /// Submission order.
    Fifo,
}

impl std::str::FromStr for BatchOrder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "descending" | "desc" => Ok(BatchOrder::Descending),
            "ascending" | "asc" => Ok(BatchOrder::Ascending),
            "fifo" => Ok(BatchOrder::Fifo),
            _ => Err(format!("unknown batch order '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchItem {
    /// Submission id; also the tie-break key.
    pub id: usize,
    pub qubits: usize,
    pub terms: MetricTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchDecision {
    /// Circuit ids in processing order.
    pub order: Vec<usize>,
    /// Selection flag per entry of `order`.
    pub selected: Vec<bool>,
    pub deferred: Vec<usize>,
}

impl BatchDecision {
    pub fn selected_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.order.iter().zip(&self.selected).filter(|(_, &s)| s).map(|(&id, _)| id)
    }
}

/// Batch metric of every item with each term min-max normalized over the
/// batch (a constant term contributes 0).
pub fn batch_scores(items: &[BatchItem], w: &BatchWeights) -> Vec<f64> {
    let norm = |f: fn(&MetricTerms) -> f64| -> Vec<f64> {
        let vals: Vec<f64> = items.iter().map(|i| f(&i.terms)).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        vals.iter().map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }).collect()
    };
    let d = norm(|t| t.density);
    let q = norm(|t| t.qubits);
    let h = norm(|t| t.depth);
    (0..items.len()).map(|i| w.density * d[i] + w.qubits * q[i] + w.depth * h[i]).collect()
}

/// Orders the batch and marks circuits selected first-fit against the total
/// free computing qubits; the rest are deferred.
pub fn order_batch(
    items: &[BatchItem],
    w: &BatchWeights,
    order: BatchOrder,
    free_qubits: usize,
) -> Result<BatchDecision, String> {
    if items.is_empty() {
        return Err("empty batch".into());
    }
    let scores = batch_scores(items, w);
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| {
        let by_score = match order {
            BatchOrder::Descending => scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal),
            BatchOrder::Ascending => scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal),
            BatchOrder::Fifo => Ordering::Equal,
        };
        by_score.then(items[a].id.cmp(&items[b].id))
    });
    let mut left = free_qubits;
    let mut decision = BatchDecision { order: Vec::new(), selected: Vec::new(), deferred: Vec::new() };
    for i in idx {
        let it = &items[i];
        let take = it.qubits <= left;
        if take {
            left -= it.qubits;
        } else {
            decision.deferred.push(it.id);
        }
        decision.order.push(it.id);
        decision.selected.push(take);
    }
    Ok(decision)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: usize, qubits: usize, density: f64, depth: f64) -> BatchItem {
        BatchItem { id, qubits, terms: MetricTerms { density, qubits: qubits as f64, depth } }
    }

    #[test]
    fn capacity_arithmetic() {
        let items = [item(0, 30, 1.0, 5.0), item(1, 100, 1.0, 5.0)];
        let w = BatchWeights::new(0.0, 1.0, 0.0);
        let d = order_batch(&items, &w, BatchOrder::Descending, 100).unwrap();
        assert_eq!(d.order, vec![1, 0]);
        assert_eq!(d.selected, vec![true, false]);
        assert_eq!(d.deferred, vec![0]);
        let d = order_batch(&items, &w, BatchOrder::Descending, 130).unwrap();
        assert_eq!(d.selected, vec![true, true]);
        // the smaller one still fits when the larger does not
        let d = order_batch(&items, &w, BatchOrder::Descending, 50).unwrap();
        assert_eq!(d.selected, vec![false, true]);
        assert_eq!(d.selected_ids().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn single_and_ties() {
        let w = BatchWeights::default();
        let d = order_batch(&[item(7, 10, 2.0, 3.0)], &w, BatchOrder::Descending, 400).unwrap();
        assert_eq!(d.selected, vec![true]);
        let same = [item(3, 10, 1.0, 4.0), item(1, 10, 1.0, 4.0), item(2, 10, 1.0, 4.0)];
        let d = order_batch(&same, &w, BatchOrder::Descending, 400).unwrap();
        assert_eq!(d.order, vec![1, 2, 3]);
        assert!(order_batch(&[], &w, BatchOrder::Fifo, 10).is_err());
    }

    #[test]
    fn orders_and_normalization() {
        let items = [item(0, 20, 1.0, 10.0), item(1, 60, 3.0, 100.0), item(2, 40, 2.0, 50.0)];
        let w = BatchWeights::default();
        let s = batch_scores(&items, &w);
        assert_eq!(s[0], 0.0);
        assert!((s[1] - 2.5).abs() < 1e-12);
        assert!((s[2] - (0.5 + 0.5 + 0.5 * 40.0 / 90.0)).abs() < 1e-12);
        let desc = order_batch(&items, &w, BatchOrder::Descending, 400).unwrap();
        assert_eq!(desc.order, vec![1, 2, 0]);
        let asc = order_batch(&items, &w, BatchOrder::Ascending, 400).unwrap();
        assert_eq!(asc.order, vec![0, 2, 1]);
        let fifo = order_batch(&items, &w, BatchOrder::Fifo, 400).unwrap();
        assert_eq!(fifo.order, vec![0, 1, 2]);
        assert_eq!("fifo".parse::<BatchOrder>().unwrap(), BatchOrder::Fifo);
    }
}
