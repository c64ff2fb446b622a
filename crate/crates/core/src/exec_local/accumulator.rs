use std::cmp::Ordering;
use std::sync::Mutex;

type Op<T> = Box<dyn Fn(&T, &T) -> T + Send + Sync>;
type Order<T> = Box<dyn Fn(&T, &T) -> Ordering + Send + Sync>;

/// Thread-safe reduction sink.
///
/// Contributions are kept and folded on read in a canonical order, so the
/// result does not depend on the order threads contributed in, even for
/// floating-point sums.
pub struct Accumulator<T> {
    identity: T,
    op: Op<T>,
    order: Option<Order<T>>,
    items: Mutex<Vec<T>>,
}

impl<T: Clone + Send> Accumulator<T> {
    /// `op` must be associative and commutative with `identity` as unit.
    pub fn new(identity: T, op: impl Fn(&T, &T) -> T + Send + Sync + 'static) -> Self {
        Self {
            identity,
            op: Box::new(op),
            order: None,
            items: Mutex::new(Vec::new()),
        }
    }

    /// Folds contributions sorted by `order` (needed when `op` is only
    /// associative up to rounding).
    pub fn with_canonical_order(mut self, order: impl Fn(&T, &T) -> Ordering + Send + Sync + 'static) -> Self {
        self.order = Some(Box::new(order));
        self
    }

    pub fn contribute(&self, value: T) {
        self.items.lock().unwrap().push(value);
    }

    pub fn len(&self) -> usize {
        self.items.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self) -> T {
        let mut items = self.items.lock().unwrap().clone();
        if let Some(order) = &self.order {
            items.sort_by(|a, b| order(a, b));
        }
        items
            .iter()
            .fold(self.identity.clone(), |acc, x| (self.op)(&acc, x))
    }
}

impl Accumulator<f64> {
    pub fn min() -> Self {
        Self::new(f64::INFINITY, |a, b| a.min(*b))
    }

    pub fn max() -> Self {
        Self::new(f64::NEG_INFINITY, |a, b| a.max(*b))
    }

    pub fn sum() -> Self {
        Self::new(0.0, |a, b| a + b).with_canonical_order(f64::total_cmp)
    }
}
