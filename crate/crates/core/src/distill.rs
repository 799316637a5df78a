//! Query-based surrogate training. A hidden classifier sits behind a
//! budgeted [`BlackBoxHandle`]; a dense student is fitted to its answers.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::classifier::{argmax, Classifier};
use crate::data::Dataset;
use crate::error::{ensure_dim, Error, Result};
use crate::netcore::{Activation, DenseNetwork, LossKind, Targets, TrainConfig, Trainer};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QueryMode {
    Logits,
    LabelOnly,
}

impl QueryMode {
    pub fn name(self) -> &'static str {
        match self {
            QueryMode::Logits => "logits",
            QueryMode::LabelOnly => "label-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "logits" => Some(QueryMode::Logits),
            "label-only" | "labels" => Some(QueryMode::LabelOnly),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Response {
    Logits(Vec<f64>),
    Label(usize),
}

/// Query-only access to a classifier with a hard budget.
pub struct BlackBoxHandle<C> {
    inner: C,
    initial: usize,
    spent: usize,
    mode: QueryMode,
}

impl<C: Classifier> BlackBoxHandle<C> {
    pub fn new(inner: C, budget: usize, mode: QueryMode) -> Self {
        Self { inner, initial: budget, spent: 0, mode }
    }

    pub fn remaining(&self) -> usize {
        self.initial - self.spent
    }

    pub fn spent(&self) -> usize {
        self.spent
    }

    pub fn initial_budget(&self) -> usize {
        self.initial
    }

    pub fn mode(&self) -> QueryMode {
        self.mode
    }

    pub fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    /// Answers a batch, charging one query per input. A batch larger than
    /// the remaining budget is refused whole and charges nothing.
    pub fn query(&mut self, batch: &[Vec<f64>]) -> Result<Vec<Response>> {
        if batch.len() > self.remaining() {
            return Err(Error::BudgetExhausted {
                requested: batch.len(),
                remaining: self.remaining(),
                spent: self.spent,
            });
        }
        let answers = batch
            .iter()
            .map(|x| {
                let logits = self.inner.logits(x)?;
                Ok(match self.mode {
                    QueryMode::Logits => Response::Logits(logits),
                    QueryMode::LabelOnly => Response::Label(argmax(&logits)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.spent += batch.len();
        Ok(answers)
    }

    /// Unmetered predictions used only for reporting, never for training.
    fn audit(&self) -> &C {
        &self.inner
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistillReport {
    /// Argmax agreement with the teacher on the held-out part of the transfer set.
    pub agreement: f64,
    pub student_accuracy: Option<f64>,
    pub teacher_accuracy: Option<f64>,
    /// `100 * student / teacher` accuracy.
    pub accuracy_ratio: Option<f64>,
    pub queries_spent: usize,
    pub loss_history: Vec<f64>,
    /// The budget ran out before every training input had been queried.
    pub truncated: bool,
    pub holdout_size: usize,
}

impl DistillReport {
    /// Key-value text block, one `key=value` per line.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x}"));
        format!(
            "agreement={}\nstudent_accuracy={}\nteacher_accuracy={}\naccuracy_ratio={}\nqueries_spent={}\ntruncated={}\nholdout_size={}\nepochs_run={}\n",
            self.agreement,
            opt(self.student_accuracy),
            opt(self.teacher_accuracy),
            opt(self.accuracy_ratio),
            self.queries_spent,
            self.truncated,
            self.holdout_size,
            self.loss_history.len(),
        )
    }
}

/// Fraction of inputs on which both models pick the same class.
pub fn agreement<A, B>(a: &A, b: &B, inputs: &[Vec<f64>]) -> Result<f64>
where
    A: Classifier + ?Sized,
    B: Classifier + ?Sized,
{
    if inputs.is_empty() {
        return Err(Error::Empty("agreement inputs"));
    }
    ensure_dim(a.input_dim(), b.input_dim())?;
    let mut same = 0usize;
    for x in inputs {
        if a.predict(x)? == b.predict(x)? {
            same += 1;
        }
    }
    Ok(same as f64 / inputs.len() as f64)
}

pub fn accuracy<C: Classifier + ?Sized>(model: &C, data: &Dataset) -> Result<f64> {
    let labels = data.require_labels()?;
    if data.is_empty() {
        return Err(Error::Empty("labelled dataset"));
    }
    let mut hits = 0usize;
    for (x, y) in data.features.iter().zip(labels) {
        if model.predict(x)? == *y {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// `100 * accuracy(student) / accuracy(teacher)`; may exceed 100.
pub fn accuracy_ratio<S, T>(student: &S, teacher: &T, data: &Dataset) -> Result<f64>
where
    S: Classifier + ?Sized,
    T: Classifier + ?Sized,
{
    let teacher_acc = accuracy(teacher, data)?;
    if teacher_acc == 0.0 {
        return Err(Error::Undefined("accuracy ratio with a teacher that is never right"));
    }
    Ok(100.0 * accuracy(student, data)? / teacher_acc)
}

/// Trains a fresh student with layer sizes `arch`. See [`distill_into`].
#[allow(clippy::too_many_arguments)]
pub fn distill<C, R>(
    handle: &mut BlackBoxHandle<C>,
    transfer: &[Vec<f64>],
    arch: &[usize],
    activation: Activation,
    budget: usize,
    cfg: &TrainConfig,
    labelled_eval: Option<&Dataset>,
    rng: &mut R,
) -> Result<(DenseNetwork, DistillReport)>
where
    C: Classifier,
    R: Rng + ?Sized,
{
    if arch.len() < 2 {
        return Err(Error::invalid("arch", "need input and output sizes"));
    }
    ensure_dim(handle.input_dim(), arch[0])?;
    ensure_dim(handle.num_classes(), arch[arch.len() - 1])?;
    let student = DenseNetwork::new(arch, activation, rng.random())?;
    distill_into(handle, transfer, &student, budget, cfg, labelled_eval, rng)
}

/// Fits `student` to the handle's answers on `transfer`.
///
/// A fifth of the transfer set is held out for the agreement figure. Each
/// training input is queried once, the first time a batch needs it, and the
/// answer is cached, so later epochs are free. At most `budget` queries are
/// spent. If the budget runs out mid-epoch the unqueried inputs are dropped,
/// the remaining epochs run on what was cached and the report is marked
/// truncated. Logit answers are fitted with the ℓ1 logit loss, label answers
/// with cross-entropy; `cfg.loss` is ignored.
///
/// The held-out agreement and the optional accuracies are computed with
/// unmetered teacher predictions.
pub fn distill_into<C, R>(
    handle: &mut BlackBoxHandle<C>,
    transfer: &[Vec<f64>],
    student: &DenseNetwork,
    budget: usize,
    cfg: &TrainConfig,
    labelled_eval: Option<&Dataset>,
    rng: &mut R,
) -> Result<(DenseNetwork, DistillReport)>
where
    C: Classifier,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if transfer.is_empty() {
        return Err(Error::Empty("transfer set"));
    }
    if budget == 0 {
        return Err(Error::invalid("budget", "must be positive"));
    }
    ensure_dim(handle.input_dim(), student.input_dim())?;
    ensure_dim(handle.num_classes(), student.num_classes())?;
    for x in transfer {
        ensure_dim(handle.input_dim(), x.len())?;
    }

    let mut order: Vec<usize> = (0..transfer.len()).collect();
    order.shuffle(rng);
    let holdout_size = if transfer.len() >= 5 { transfer.len() / 5 } else { 0 };
    let (held, train_idx) = order.split_at(holdout_size);
    let holdout: Vec<Vec<f64>> = held.iter().map(|&i| transfer[i].clone()).collect();
    let train_set: Vec<&Vec<f64>> = train_idx.iter().map(|&i| &transfer[i]).collect();

    let allowance = budget.min(handle.remaining());
    let first_batch = cfg.batch_size.min(train_set.len());
    if allowance < first_batch {
        return Err(Error::BudgetExhausted {
            requested: first_batch,
            remaining: allowance,
            spent: handle.spent(),
        });
    }

    let loss = match handle.mode() {
        QueryMode::Logits => LossKind::L1Logit,
        QueryMode::LabelOnly => LossKind::CrossEntropy,
    };
    let mut trainer = Trainer::new(student.clone(), cfg)?.with_loss(loss);
    let mut cache: Vec<Option<Response>> = vec![None; train_set.len()];
    let mut pool: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle_rng = rng::substream(cfg.seed, 0);
    let mut used = 0usize;
    let mut truncated = false;
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        pool.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        let mut seen = 0usize;
        for batch in pool.chunks(cfg.batch_size) {
            if !truncated {
                let missing: Vec<usize> = batch.iter().copied().filter(|&i| cache[i].is_none()).collect();
                let take = missing.len().min(allowance - used);
                if take < missing.len() {
                    truncated = true;
                }
                if take > 0 {
                    let xs: Vec<Vec<f64>> = missing[..take].iter().map(|&i| train_set[i].clone()).collect();
                    for (i, r) in missing[..take].iter().zip(handle.query(&xs)?) {
                        cache[*i] = Some(r);
                    }
                    used += take;
                }
            }
            let ready: Vec<usize> = batch.iter().copied().filter(|&i| cache[i].is_some()).collect();
            if ready.is_empty() {
                continue;
            }
            let xs: Vec<Vec<f64>> = ready.iter().map(|&i| train_set[i].clone()).collect();
            let value = match handle.mode() {
                QueryMode::Logits => {
                    let ys: Vec<Vec<f64>> = ready
                        .iter()
                        .map(|&i| match &cache[i] {
                            Some(Response::Logits(l)) => l.clone(),
                            _ => unreachable!("logit mode caches logits"),
                        })
                        .collect();
                    trainer.step(&xs, Targets::Logits(&ys))?
                }
                QueryMode::LabelOnly => {
                    let ys: Vec<usize> = ready
                        .iter()
                        .map(|&i| match &cache[i] {
                            Some(Response::Label(l)) => *l,
                            _ => unreachable!("label mode caches labels"),
                        })
                        .collect();
                    trainer.step(&xs, Targets::Labels(&ys))?
                }
            };
            total += value * ready.len() as f64;
            seen += ready.len();
        }
        history.push(if seen > 0 { total / seen as f64 } else { 0.0 });
        if truncated {
            pool.retain(|&i| cache[i].is_some());
        }
    }

    let student = trainer.into_network();
    let teacher = handle.audit();
    let agree_on: Vec<Vec<f64>> = if holdout.is_empty() {
        train_set.iter().map(|x| (*x).clone()).collect()
    } else {
        holdout
    };
    let agreement = agreement(&student, teacher, &agree_on)?;
    let (student_accuracy, teacher_accuracy, ratio) = match labelled_eval {
        Some(data) => {
            let s = accuracy(&student, data)?;
            let t = accuracy(teacher, data)?;
            (Some(s), Some(t), (t > 0.0).then(|| 100.0 * s / t))
        }
        None => (None, None, None),
    };
    Ok((
        student,
        DistillReport {
            agreement,
            student_accuracy,
            teacher_accuracy,
            accuracy_ratio: ratio,
            queries_spent: used,
            loss_history: history,
            truncated,
            holdout_size,
        },
    ))
}
