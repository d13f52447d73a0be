//! Cache-line access tracing for unit tests. Compiles to nothing otherwise.

#[cfg(test)]
mod imp {
    use std::cell::RefCell;
    use std::collections::BTreeSet;

    thread_local! {
        static LINES: RefCell<Option<BTreeSet<usize>>> = const { RefCell::new(None) };
    }

    #[inline]
    pub(crate) fn touch<T>(addr: *const T) {
        LINES.with(|l| {
            if let Some(set) = l.borrow_mut().as_mut() {
                set.insert(addr as usize / 64);
            }
        });
    }

    /// Runs `f` and returns the 64-byte lines touched by instrumented accesses.
    pub(crate) fn record<R>(f: impl FnOnce() -> R) -> (R, BTreeSet<usize>) {
        LINES.with(|l| *l.borrow_mut() = Some(BTreeSet::new()));
        let out = f();
        let lines = LINES.with(|l| l.borrow_mut().take().unwrap_or_default());
        (out, lines)
    }
}

#[cfg(not(test))]
mod imp {
    #[inline(always)]
    pub(crate) fn touch<T>(_addr: *const T) {}
}

pub(crate) use imp::*;
