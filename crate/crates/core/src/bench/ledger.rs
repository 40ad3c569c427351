use serde::{Deserialize, Serialize};

use super::{BenchError, Result, TabularBenchmark};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Source-task sample used for pretraining.
    Source,
    /// Target-task finetune and validation sample.
    Finetune,
    /// Final evaluations of the ranked candidates.
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BudgetCaps {
    pub source: usize,
    pub finetune: usize,
    pub final_: usize,
}

impl BudgetCaps {
    pub fn cap(&self, phase: Phase) -> usize {
        match phase {
            Phase::Source => self.source,
            Phase::Finetune => self.finetune,
            Phase::Final => self.final_,
        }
    }

    pub fn total(&self) -> usize {
        self.source + self.finetune + self.final_
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub arch: usize,
    pub task: usize,
    pub phase: Phase,
    pub metric: f64,
}

/// Gate for every ground-truth lookup of one search run. Refuses repeated
/// (arch, task) evaluations and evaluations beyond a phase cap.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    caps: BudgetCaps,
    evaluated: Vec<Evaluation>,
    seen: std::collections::HashSet<(usize, usize)>,
}

impl BudgetLedger {
    pub fn new(caps: BudgetCaps) -> Self {
        Self { caps, evaluated: Vec::new(), seen: Default::default() }
    }

    pub fn caps(&self) -> BudgetCaps {
        self.caps
    }

    pub fn evaluated(&self) -> &[Evaluation] {
        &self.evaluated
    }

    pub fn len(&self) -> usize {
        self.evaluated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evaluated.is_empty()
    }

    pub fn used(&self, phase: Phase) -> usize {
        self.evaluated.iter().filter(|e| e.phase == phase).count()
    }

    pub fn remaining(&self, phase: Phase) -> usize {
        self.caps.cap(phase) - self.used(phase)
    }

    pub fn contains(&self, task: usize, arch: usize) -> bool {
        self.seen.contains(&(task, arch))
    }

    /// Evaluations on `task`, in ledger order.
    pub fn on_task(&self, task: usize) -> impl Iterator<Item = &Evaluation> {
        self.evaluated.iter().filter(move |e| e.task == task)
    }

    pub fn evaluate(&mut self, bench: &TabularBenchmark, task: usize, arch: usize, phase: Phase) -> Result<f64> {
        if task >= bench.tasks.len() {
            return Err(BenchError::UnknownTask(task.to_string()));
        }
        if arch >= bench.len() {
            return Err(BenchError::UnknownArch(arch.to_string()));
        }
        if self.contains(task, arch) {
            return Err(BenchError::DuplicateEvaluation {
                arch: bench.ids[arch].clone(),
                task: bench.tasks[task].name.clone(),
            });
        }
        let cap = self.caps.cap(phase);
        if self.used(phase) >= cap {
            return Err(BenchError::BudgetExceeded { phase, cap });
        }
        let metric = bench.metric(task, arch);
        self.seen.insert((task, arch));
        self.evaluated.push(Evaluation { arch, task, phase, metric });
        Ok(metric)
    }

    /// Best evaluated architecture on `task`; the earliest wins ties.
    pub fn best(&self, bench: &TabularBenchmark, task: usize) -> Option<&Evaluation> {
        let dir = bench.tasks[task].direction;
        self.on_task(task).fold(None, |best: Option<&Evaluation>, e| match best {
            Some(b) if !dir.better(e.metric, b.metric) => Some(b),
            _ => Some(e),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{gen_synthetic, Direction, SynthTask};

    #[test]
    fn rejects_duplicates_and_overruns() {
        let tasks = [SynthTask::new("t", Direction::Max, 1.0)];
        let b = gen_synthetic(16, 2, 4, &tasks, 0.0, 1).unwrap();
        let mut l = BudgetLedger::new(BudgetCaps { source: 0, finetune: 2, final_: 1 });
        l.evaluate(&b, 0, 3, Phase::Finetune).unwrap();
        assert!(matches!(l.evaluate(&b, 0, 3, Phase::Final), Err(BenchError::DuplicateEvaluation { .. })));
        l.evaluate(&b, 0, 4, Phase::Finetune).unwrap();
        assert!(matches!(l.evaluate(&b, 0, 5, Phase::Finetune), Err(BenchError::BudgetExceeded { .. })));
        assert!(matches!(l.evaluate(&b, 0, 5, Phase::Source), Err(BenchError::BudgetExceeded { .. })));
        l.evaluate(&b, 0, 5, Phase::Final).unwrap();
        assert_eq!(l.len(), 3);
        assert!(l.len() <= l.caps().total());
        let best = l.best(&b, 0).unwrap();
        assert!([3, 4, 5].contains(&best.arch));
        assert!(l.on_task(0).all(|e| e.metric <= best.metric));
    }
}
