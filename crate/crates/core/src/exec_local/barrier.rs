use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarrierWait {
    /// Index of the release this wait belonged to; identical for all parties.
    pub generation: u64,
    /// `true` for exactly one party per release (the last to arrive).
    pub is_leader: bool,
}

#[derive(Debug)]
struct State {
    arrived: usize,
    generation: u64,
    broken: bool,
}

/// Reusable barrier for a fixed number of parties.
///
/// Unlike `std::sync::Barrier` it reports the generation index and can be
/// broken, which wakes every waiter with [`Error::BrokenBarrier`].
#[derive(Debug)]
pub struct CyclicBarrier {
    parties: usize,
    state: Mutex<State>,
    cv: Condvar,
}

impl CyclicBarrier {
    pub fn new(parties: usize) -> Self {
        assert!(parties > 0, "a barrier needs at least one party");
        Self {
            parties,
            state: Mutex::new(State {
                arrived: 0,
                generation: 0,
                broken: false,
            }),
            cv: Condvar::new(),
        }
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn wait(&self) -> Result<BarrierWait, Error> {
        self.wait_until(None)
    }

    /// Like [`wait`](Self::wait); breaks the barrier if the release does not
    /// happen within `timeout`.
    pub fn wait_timeout(&self, timeout: Duration) -> Result<BarrierWait, Error> {
        self.wait_until(Some(Instant::now() + timeout))
    }

    fn wait_until(&self, deadline: Option<Instant>) -> Result<BarrierWait, Error> {
        let mut st = self.state.lock().unwrap();
        if st.broken {
            return Err(Error::BrokenBarrier);
        }
        let generation = st.generation;
        st.arrived += 1;
        if st.arrived == self.parties {
            st.arrived = 0;
            st.generation += 1;
            self.cv.notify_all();
            return Ok(BarrierWait {
                generation,
                is_leader: true,
            });
        }
        while st.generation == generation && !st.broken {
            st = match deadline {
                None => self.cv.wait(st).unwrap(),
                Some(d) => {
                    let now = Instant::now();
                    if now >= d {
                        st.broken = true;
                        self.cv.notify_all();
                        return Err(Error::BrokenBarrier);
                    }
                    self.cv.wait_timeout(st, d - now).unwrap().0
                }
            };
        }
        if st.generation != generation {
            Ok(BarrierWait {
                generation,
                is_leader: false,
            })
        } else {
            Err(Error::BrokenBarrier)
        }
    }

    /// Marks the barrier broken and wakes all waiters.
    pub fn break_barrier(&self) {
        let mut st = self.state.lock().unwrap();
        st.broken = true;
        self.cv.notify_all();
    }

    pub fn is_broken(&self) -> bool {
        self.state.lock().unwrap().broken
    }
}
