//! Named task kinds a worker knows how to run.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use serde_json::{json, Value};

use crate::benchfns;
use crate::params::ParamMap;

/// Worker-wide state visible to every task.
#[derive(Debug, Default)]
pub struct TaskContext {
    /// Parameters installed by `initparams`.
    pub shared: RwLock<ParamMap>,
}

thread_local! {
    static THREAD_PARAMS: RefCell<ParamMap> = RefCell::new(ParamMap::new());
}

/// Runs `f` on the calling pool thread's private parameter table.
pub fn with_thread_params<R>(f: impl FnOnce(&mut ParamMap) -> R) -> R {
    THREAD_PARAMS.with(|t| f(&mut t.borrow_mut()))
}

pub type Handler = Arc<dyn Fn(&Value, &TaskContext) -> Result<Value, String> + Send + Sync>;

#[derive(Clone, Default)]
pub struct TaskRegistry {
    handlers: HashMap<String, Handler>,
}

impl TaskRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `evalfn`, `initparams`, `threadparams`, `getparam`, `noop`, `fail`
    /// and `sleep`.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register("evalfn", eval_fn);
        r.register("initparams", |p, ctx| {
            let update = param_map(p)?;
            ctx.shared.write().unwrap().merge(&update);
            Ok(Value::Null)
        });
        r.register("threadparams", |p, _| {
            let update = param_map(p)?;
            with_thread_params(|t| t.merge(&update));
            Ok(Value::Null)
        });
        r.register("getparam", |p, ctx| {
            let key = p.as_str().ok_or("getparam payload must be a key string")?;
            let v = with_thread_params(|t| t.get(key).cloned()).or_else(|| ctx.shared.read().unwrap().get(key).cloned());
            serde_json::to_value(v).map_err(|e| e.to_string())
        });
        r.register("noop", |_, _| Ok(Value::Null));
        r.register("fail", |p, _| Err(p.as_str().unwrap_or("task asked to fail").to_owned()));
        r.register("sleep", |p, _| {
            let ms = p.as_u64().ok_or("sleep payload must be milliseconds")?;
            std::thread::sleep(Duration::from_millis(ms));
            Ok(Value::Null)
        });
        r
    }

    pub fn register(
        &mut self,
        kind: impl Into<String>,
        f: impl Fn(&Value, &TaskContext) -> Result<Value, String> + Send + Sync + 'static,
    ) {
        self.handlers.insert(kind.into(), Arc::new(f));
    }

    pub fn contains(&self, kind: &str) -> bool {
        self.handlers.contains_key(kind)
    }

    pub fn handler(&self, kind: &str) -> Option<Handler> {
        self.handlers.get(kind).cloned()
    }

    pub fn call(&self, kind: &str, payload: &Value, ctx: &TaskContext) -> Result<Value, String> {
        match self.handlers.get(kind) {
            Some(h) => h(payload, ctx),
            None => Err(format!("UnknownTaskKind: {kind}")),
        }
    }
}

fn param_map(v: &Value) -> Result<ParamMap, String> {
    serde_json::from_value(v.clone()).map_err(|e| format!("bad parameter map: {e}"))
}

/// Payload for an `evalfn` task.
pub fn evalfn_payload(function: &str, arg: &[f64], params: Option<&ParamMap>) -> Value {
    match params {
        Some(p) => json!({"function": function, "arg": arg, "params": p}),
        None => json!({"function": function, "arg": arg}),
    }
}

/// Evaluates a registered benchmark. Parameters are the `initparams` table,
/// then the thread table, then the payload's own, later ones winning. A
/// non-finite value is returned as `null`.
fn eval_fn(p: &Value, ctx: &TaskContext) -> Result<Value, String> {
    let name = p
        .get("function")
        .and_then(Value::as_str)
        .ok_or("evalfn payload needs a function name")?;
    let arg: Vec<f64> = p
        .get("arg")
        .map(|a| serde_json::from_value(a.clone()))
        .transpose()
        .map_err(|e| format!("bad argument: {e}"))?
        .ok_or("evalfn payload needs an argument")?;
    let mut params = ctx.shared.read().unwrap().clone();
    with_thread_params(|t| params.merge(t));
    if let Some(extra) = p.get("params") {
        params.merge(&param_map(extra)?);
    }
    let f = benchfns::build(name, arg.len(), &params).map_err(|e| e.to_string())?;
    let v = f.eval(&arg, &params);
    Ok(if v.is_finite() { json!(v) } else { Value::Null })
}

/// Reads an `evalfn` result back: `null` is `+inf`.
pub fn value_as_fitness(v: &Value) -> Option<f64> {
    match v {
        Value::Null => Some(f64::INFINITY),
        v => v.as_f64(),
    }
}
