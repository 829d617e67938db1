//! Thread-local accounting of live matrix scalars, used by tests to check the
//! linear-memory contract of the landmark pipelines.

use std::cell::Cell;

thread_local! {
    static ENABLED: Cell<bool> = const { Cell::new(false) };
    static CURRENT: Cell<i64> = const { Cell::new(0) };
    static PEAK: Cell<i64> = const { Cell::new(0) };
}

pub(crate) fn on_alloc(len: usize) {
    ENABLED.with(|e| {
        if e.get() {
            CURRENT.with(|c| {
                let now = c.get() + len as i64;
                c.set(now);
                PEAK.with(|p| {
                    if now > p.get() {
                        p.set(now);
                    }
                });
            });
        }
    });
}

pub(crate) fn on_free(len: usize) {
    ENABLED.with(|e| {
        if e.get() {
            CURRENT.with(|c| c.set(c.get() - len as i64));
        }
    });
}

/// Run `f` while counting matrix allocations on this thread; returns the
/// result together with the peak number of scalar slots simultaneously live.
///
/// Matrices created before the call and dropped inside it are not part of the
/// measured workload; keep inputs alive across the call for a faithful peak.
/// Not reentrant: nested calls reset the outer measurement.
pub fn audited<T>(f: impl FnOnce() -> T) -> (T, usize) {
    ENABLED.with(|e| e.set(true));
    CURRENT.with(|c| c.set(0));
    PEAK.with(|p| p.set(0));
    let value = f();
    let peak = PEAK.with(|p| p.get()).max(0) as usize;
    ENABLED.with(|e| e.set(false));
    (value, peak)
}

#[cfg(test)]
mod tests {
    use super::audited;
    use crate::matcore::DenseMatrix;

    #[test]
    fn peak_counts_simultaneously_live_scalars() {
        let (_, peak) = audited(|| {
            let a = DenseMatrix::zeros(4, 4); // 16 live
            let b = DenseMatrix::zeros(2, 3); // 22 live
            drop(a); // 6 live
            let c = DenseMatrix::zeros(5, 1); // 11 live
            drop(b);
            drop(c);
        });
        assert_eq!(peak, 22);
    }

    #[test]
    fn allocations_outside_audit_are_ignored() {
        let outside = DenseMatrix::zeros(10, 10);
        let (_, peak) = audited(|| {
            let inside = DenseMatrix::zeros(2, 2);
            drop(inside);
        });
        assert_eq!(peak, 4);
        drop(outside);
    }
}
