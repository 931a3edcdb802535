//! Central finite-difference verification of the backward pass.

use crate::graph::Graph;
use crate::tensor::Tensor;
use crate::TensorError;

#[derive(Debug, Clone)]
pub struct LeafReport {
    pub name: String,
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub leaves: Vec<LeafReport>,
}

impl GradCheckReport {
    pub fn all_pass(&self) -> bool {
        self.leaves.iter().all(|l| l.pass)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.leaves.iter().map(|l| l.max_rel_err).fold(0.0, f64::max)
    }
}

/// Relative error with a unit floor so near-zero gradients compare absolutely.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1.0)
}

/// Compare analytic gradients of `build`'s scalar loss against central
/// finite differences over every element of every named leaf. Failures are
/// reported per leaf, never thrown.
pub fn grad_check<F, E>(
    leaves: &[(String, Tensor)],
    build: F,
    tolerance: f64,
    epsilon: f64,
) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Graph) -> Result<Tensor, E>,
    E: From<TensorError>,
{
    let mut graph = Graph::new();
    let loss = build(&mut graph)?;
    let grads = graph.backward(&loss)?;

    let eval = |g: &F| -> Result<f64, E> {
        let mut graph = Graph::inference();
        Ok(g(&mut graph)?.item()?)
    };

    let mut reports = Vec::with_capacity(leaves.len());
    for (name, leaf) in leaves {
        let analytic = grads.get(leaf).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; leaf.numel()]);
        let mut max_err = 0.0f64;
        for i in 0..leaf.numel() {
            leaf.nudge(i, epsilon);
            let plus = eval(&build)?;
            leaf.nudge(i, -2.0 * epsilon);
            let minus = eval(&build)?;
            leaf.nudge(i, epsilon);
            let numeric = (plus - minus) / (2.0 * epsilon);
            max_err = max_err.max(rel_err(analytic[i], numeric));
        }
        reports.push(LeafReport {
            name: name.clone(),
            max_rel_err: max_err,
            pass: max_err < tolerance,
        });
    }
    Ok(GradCheckReport {
        tolerance,
        leaves: reports,
    })
}
