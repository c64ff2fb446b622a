//! Incumbent sharing between cooperating optimizers (observer pattern).
//!
//! Delivery is synchronous: `publish` calls every observer on the publishing
//! thread, after the channel lock is released, so an observer may publish
//! back into the same channel.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

/// Receives improved incumbents.
pub trait Observer: Send + Sync {
    fn on_incumbent(&self, channel: &IncumbentChannel, arg: &[f64], value: f64);
}

pub type ObserverId = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub arg: Vec<f64>,
    pub value: f64,
}

#[derive(Default)]
struct State {
    best: Option<Incumbent>,
    observers: Vec<(ObserverId, Arc<dyn Observer>)>,
}

/// Holds the best `(arg, value)` seen by a subject and fans improvements out
/// to registered observers. The stored value never increases.
pub struct IncumbentChannel {
    subject: String,
    state: Mutex<State>,
    next_id: AtomicU64,
}

impl IncumbentChannel {
    pub fn new(subject: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            state: Mutex::new(State::default()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn best(&self) -> Option<Incumbent> {
        self.state.lock().unwrap().best.clone()
    }

    pub fn best_value(&self) -> f64 {
        self.best().map_or(f64::INFINITY, |b| b.value)
    }

    /// Registers `obs`; if a best already exists it is delivered at once.
    pub fn attach(&self, obs: Arc<dyn Observer>) -> ObserverId {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let current = {
            let mut st = self.state.lock().unwrap();
            st.observers.push((id, Arc::clone(&obs)));
            st.best.clone()
        };
        if let Some(b) = current {
            obs.on_incumbent(self, &b.arg, b.value);
        }
        id
    }

    pub fn detach(&self, id: ObserverId) {
        self.state.lock().unwrap().observers.retain(|(i, _)| *i != id);
    }

    /// Offers a candidate; returns `true` if it strictly improved the best.
    pub fn publish(&self, arg: &[f64], value: f64) -> bool {
        self.publish_from(None, arg, value)
    }

    /// Like [`publish`](Self::publish), skipping the observer `origin`.
    pub fn publish_from(&self, origin: Option<ObserverId>, arg: &[f64], value: f64) -> bool {
        let targets = {
            let mut st = self.state.lock().unwrap();
            if st.best.as_ref().is_some_and(|b| value >= b.value) || value.is_nan() {
                return false;
            }
            st.best = Some(Incumbent {
                arg: arg.to_vec(),
                value,
            });
            st.observers
                .iter()
                .filter(|(id, _)| Some(*id) != origin)
                .map(|(_, o)| Arc::clone(o))
                .collect::<Vec<_>>()
        };
        for o in targets {
            o.on_incumbent(self, arg, value);
        }
        true
    }
}

impl std::fmt::Debug for IncumbentChannel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IncumbentChannel")
            .field("subject", &self.subject)
            .field("best", &self.best_value())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Default)]
    struct Recorder(Mutex<Vec<f64>>);

    impl Observer for Recorder {
        fn on_incumbent(&self, _: &IncumbentChannel, _: &[f64], value: f64) {
            self.0.lock().unwrap().push(value);
        }
    }

    #[test]
    fn improvements_reach_observers() {
        let ch = IncumbentChannel::new("ga");
        let r = Arc::new(Recorder::default());
        ch.attach(r.clone());
        assert!(ch.publish(&[1.0], 5.0));
        assert!(ch.publish(&[0.5], 3.0));
        assert_eq!(*r.0.lock().unwrap(), vec![5.0, 3.0]);
        assert_eq!(ch.best_value(), 3.0);
    }

    #[test]
    fn worse_publish_is_dropped() {
        let ch = IncumbentChannel::new("ga");
        let r = Arc::new(Recorder::default());
        ch.attach(r.clone());
        ch.publish(&[0.5], 3.0);
        assert!(!ch.publish(&[1.0], 5.0));
        assert!(!ch.publish(&[1.0], 3.0));
        assert_eq!(*r.0.lock().unwrap(), vec![3.0]);
        assert_eq!(ch.best_value(), 3.0);
    }

    #[test]
    fn late_observer_gets_current_best() {
        let ch = IncumbentChannel::new("ga");
        ch.publish(&[2.0], 7.0);
        let r = Arc::new(Recorder::default());
        ch.attach(r.clone());
        assert_eq!(*r.0.lock().unwrap(), vec![7.0]);
    }

    #[test]
    fn concurrent_publishes_keep_best_monotone() {
        let ch = Arc::new(IncumbentChannel::new("x"));
        let trace = Arc::new(Recorder::default());
        ch.attach(trace.clone());
        std::thread::scope(|s| {
            for t in 0..8u64 {
                let ch = Arc::clone(&ch);
                s.spawn(move || {
                    for k in 0..500u64 {
                        let v = ((k * 7919 + t * 104_729) % 1000) as f64;
                        ch.publish(&[v], v);
                    }
                });
            }
        });
        assert_eq!(ch.best_value(), 0.0);
        // Every delivered value was, at its instant, a strict improvement,
        // so the per-channel sequence of accepted values is unique.
        let mut seen = trace.0.lock().unwrap().clone();
        let n = seen.len();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        assert_eq!(seen.len(), n);
    }
}
