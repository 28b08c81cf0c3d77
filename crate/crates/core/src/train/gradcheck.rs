use rayon::prelude::*;

use super::{cross_entropy_labels, one_hot};
use crate::nn::{ForwardTrace, Layer, Mode, Network, Tensor3};
use crate::Error;

/// Relative errors are `|a − n| / max(|a|, |n|, floor)`, so gradients that
/// are zero up to roundoff are judged on absolute error. The floor is
/// `DENOM_FLOOR · h / step`: a few ulps of loss divided by the step is the
/// resolution of the difference quotient, and shrinking the step off a
/// kink coarsens it. Biases ahead of batch norm sit exactly at zero.
pub const DENOM_FLOOR: f64 = 1e-5;
/// How many times the step is divided by 10 when `±h` flips a ReLU or
/// pooling decision.
const MAX_REFINEMENTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub max_rel_error: f64,
    pub worst_index: usize,
    /// Backprop and finite-difference values at `worst_index`.
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `group[index]` of the worst parameter.
    pub worst: String,
    pub groups: Vec<GroupError>,
    pub checked: usize,
    /// Parameters whose step had to shrink to stay off a ReLU or pool kink.
    pub refined: usize,
    /// Parameters where even the smallest step crossed a kink.
    pub unresolved: usize,
}

/// ReLU on/off bits and pooling winners for layers `start..`.
fn pattern(network: &Network<f64>, trace: &ForwardTrace<f64>, start: usize) -> Vec<u32> {
    let mut out = Vec::new();
    for (l, layer) in network.layers().iter().enumerate().skip(start) {
        let relu = match layer {
            Layer::Conv(c) => c.relu,
            Layer::Dense(d) => d.relu,
            Layer::Pool(_) => {
                for a in trace.pool_argmax(l).unwrap_or(&[]) {
                    out.extend_from_slice(a);
                }
                false
            }
            _ => false,
        };
        if relu {
            for t in trace.layer_output(l) {
                out.extend(t.data().iter().map(|v| u32::from(*v > 0.0)));
            }
        }
    }
    out
}

struct Probe<'a> {
    start: usize,
    inputs: &'a [Tensor3<f64>],
    labels: &'a [usize],
}

impl Probe<'_> {
    fn run(&self, net: &Network<f64>) -> Result<(f64, Vec<u32>), Error> {
        let trace = net.forward_trace_from(self.start, self.inputs.to_vec(), None)?;
        let loss = cross_entropy_labels(trace.probabilities(), self.labels)?;
        Ok((loss, pattern(net, &trace, self.start)))
    }
}

fn set(net: &mut Network<f64>, group: usize, index: usize, value: f64) {
    net.trainable_mut()[group][index] = value;
}

/// Central finite differences against [`Network::backward`] for every
/// trainable parameter, with dropout off and the mean cross-entropy loss.
///
/// Each perturbation re-runs the network from the layer owning the
/// parameter. If `±h` changes a ReLU or pooling decision the step is
/// shrunk tenfold, up to three times.
pub fn gradient_check(network: &Network<f64>, batch: &[Tensor3<f64>], labels: &[usize], h: f64) -> Result<GradCheckReport, Error> {
    let classes = network.num_classes();
    let (_, trace) = network.forward(batch, Mode::Train { dropout_seed: None })?;
    let trace = trace.expect("training forward returns a trace");
    let targets: Vec<Vec<f64>> = labels.iter().map(|&l| one_hot(l, classes)).collect();
    let analytic = network.backward(&trace, &targets)?;

    let names = network.trainable_names();
    let owners = network.trainable_layers();
    let originals: Vec<Vec<f64>> = network.trainable().iter().map(|g| g.to_vec()).collect();

    let mut groups = Vec::with_capacity(names.len());
    let (mut refined, mut unresolved, mut checked) = (0, 0, 0);
    for (g, name) in names.iter().enumerate() {
        let probe = Probe {
            start: owners[g],
            inputs: trace.layer_input(owners[g]),
            labels,
        };
        let (_, base) = probe.run(network)?;
        let results: Vec<(f64, usize, bool, f64)> = (0..originals[g].len())
            .into_par_iter()
            .map_init(
                || network.clone(),
                |net, j| -> Result<(f64, usize, bool, f64), Error> {
                    let theta = originals[g][j];
                    let mut step = h;
                    let mut numeric = 0.0;
                    for attempt in 0..=MAX_REFINEMENTS {
                        set(net, g, j, theta + step);
                        let (lp, pp) = probe.run(net)?;
                        set(net, g, j, theta - step);
                        let (lm, pm) = probe.run(net)?;
                        set(net, g, j, theta);
                        numeric = (lp - lm) / (2.0 * step);
                        if pp == base && pm == base {
                            return Ok((numeric, attempt, false, step));
                        }
                        step /= 10.0;
                    }
                    Ok((numeric, MAX_REFINEMENTS, true, step * 10.0))
                },
            )
            .collect::<Result<_, Error>>()?;

        let mut worst = (0.0, 0, 0.0, 0.0);
        for (j, (numeric, attempts, bad, step)) in results.into_iter().enumerate() {
            let a = analytic.groups[g][j];
            let floor = DENOM_FLOOR * h / step;
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            if rel > worst.0 || j == 0 {
                worst = (rel, j, a, numeric);
            }
            refined += usize::from(attempts > 0);
            unresolved += usize::from(bad);
            checked += 1;
        }
        groups.push(GroupError {
            name: name.clone(),
            max_rel_error: worst.0,
            worst_index: worst.1,
            analytic: worst.2,
            numeric: worst.3,
        });
    }

    let top = groups
        .iter()
        .fold(None::<&GroupError>, |acc, e| match acc {
            Some(a) if a.max_rel_error >= e.max_rel_error => Some(a),
            _ => Some(e),
        })
        .expect("network has trainable parameters");
    Ok(GradCheckReport {
        max_rel_error: top.max_rel_error,
        worst: format!("{}[{}]", top.name, top.worst_index),
        groups: groups.clone(),
        checked,
        refined,
        unresolved,
    })
}
