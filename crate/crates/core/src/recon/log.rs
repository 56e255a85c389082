use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// ‖A u − b‖².
    pub data_residual: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceLog {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// Why the solver stopped.
    pub note: String,
}

impl ConvergenceLog {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,objective,data_residual,primal_residual,dual_residual\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e}",
                r.iteration, r.objective, r.data_residual, r.primal_residual, r.dual_residual
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let log = ConvergenceLog {
            records: vec![IterationRecord {
                iteration: 1,
                objective: 2.5,
                data_residual: 1.0,
                primal_residual: 0.5,
                dual_residual: 0.25,
            }],
            converged: true,
            note: String::new(),
        };
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,objective,data_residual,primal_residual,dual_residual");
        assert_eq!(lines[1], "1,2.5e0,1e0,5e-1,2.5e-1");
    }
}
