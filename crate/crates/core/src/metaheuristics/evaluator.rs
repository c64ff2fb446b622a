use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::exec_dist::{evalfn_payload, value_as_fitness, Client, TaskDescriptor};
use crate::function::Evaluator;
use crate::optimizer::RunContext;

/// Evaluates whole populations, locally or on an exec_dist network.
///
/// Budget is reserved for the batch before any evaluation starts; when
/// less than the batch remains only the funded prefix is evaluated.
pub struct PopulationEvaluator {
    evaluator: Evaluator,
    remote: Option<Remote>,
}

struct Remote {
    addr: String,
    /// Idle connections; one is borrowed per batch.
    clients: Mutex<Vec<Client>>,
}

impl PopulationEvaluator {
    pub fn local(evaluator: Evaluator) -> Self {
        Self {
            evaluator,
            remote: None,
        }
    }

    /// Distributed when `dist.server.host` is set (`dist.server.port`
    /// defaults to 7890); the connection is checked here.
    pub fn from_context(ctx: &RunContext<'_>) -> Result<Self> {
        let p = ctx.params;
        if !p.contains("dist.server.host") {
            return Ok(Self::local(ctx.evaluator.clone()));
        }
        let host = p.string("dist.server.host")?;
        let port = p.int_or("dist.server.port", crate::exec_dist::DEFAULT_CLIENT_PORT as i64)?;
        let addr = format!("{host}:{port}");
        let client = Client::connect(&addr).map_err(|e| Error::DistributedEvalFailed(format!("{addr}: {e}")))?;
        Ok(Self {
            evaluator: ctx.evaluator.clone(),
            remote: Some(Remote {
                addr,
                clients: Mutex::new(vec![client]),
            }),
        })
    }

    pub fn is_distributed(&self) -> bool {
        self.remote.is_some()
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    /// Fitness of as many of `xs` as the budget allows (a prefix), or
    /// `BudgetExhausted` when none can be paid for.
    pub fn evaluate(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let k = self.evaluator.budget().reserve_up_to(xs.len() as u64) as usize;
        if k == 0 {
            return Err(Error::BudgetExhausted {
                limit: self.evaluator.budget().limit(),
            });
        }
        self.evaluate_prepaid(&xs[..k])
    }

    /// Fitness of all of `xs`, against evaluations already reserved.
    pub fn evaluate_prepaid(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        match &self.remote {
            None => xs.iter().map(|x| self.evaluator.fitness_prepaid(x)).collect(),
            Some(r) => self.remote_batch(r, xs),
        }
    }

    fn remote_batch(&self, r: &Remote, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let name = self.evaluator.function().name().to_owned();
        let params = self.evaluator.params();
        let tasks = xs
            .iter()
            .map(|x| TaskDescriptor::new("evalfn", evalfn_payload(&name, x, Some(params))))
            .collect();
        let pooled = r.clients.lock().unwrap().pop();
        let mut client = match pooled {
            Some(c) => c,
            None => Client::connect(&r.addr)?,
        };
        let results = client.submit_work(tasks)?;
        r.clients.lock().unwrap().push(client);
        results
            .iter()
            .map(|v| {
                value_as_fitness(v).ok_or_else(|| Error::DistributedEvalFailed(format!("non-numeric result {v}")))
            })
            .collect()
    }
}
