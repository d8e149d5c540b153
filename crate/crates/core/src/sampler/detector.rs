//! On-path membership for the current loop-erased walk.
//!
//! Both detectors answer "is `v` on the current path" in O(1) and forget the
//! nodes of an erased loop. They never consume randomness, so swapping one
//! for the other leaves the sampled forest unchanged.

/// Cycle-detection scheme used by the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CycleDetection {
    /// A single stamp per node, cleared on the erased slice of the path.
    OneCounter,
    /// `(id, val)` pairs per node; erasing a loop only touches the counters.
    #[default]
    MultiCounter,
}

pub(crate) enum Detector {
    One(OneCounter),
    Multi(MultiCounter),
}

impl Detector {
    pub(crate) fn new(kind: CycleDetection, n: usize, max_ids: usize) -> Self {
        match kind {
            CycleDetection::OneCounter => Detector::One(OneCounter::new(n)),
            CycleDetection::MultiCounter => Detector::Multi(MultiCounter::new(n, max_ids)),
        }
    }

    #[inline]
    pub(crate) fn begin_walk(&mut self, start: usize) {
        match self {
            Detector::One(d) => d.begin_walk(start),
            Detector::Multi(d) => d.begin_walk(start),
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, v: usize) {
        match self {
            Detector::One(d) => d.push(v),
            Detector::Multi(d) => d.push(v),
        }
    }

    #[inline]
    pub(crate) fn on_path(&self, v: usize) -> bool {
        match self {
            Detector::One(d) => d.on_path(v),
            Detector::Multi(d) => d.on_path(v),
        }
    }

    /// Forgets `path[k + 1..]`, the loop closed at `path[k]`.
    #[inline]
    pub(crate) fn discard_after(&mut self, path: &[usize], k: usize) {
        match self {
            Detector::One(d) => d.discard_after(path, k),
            Detector::Multi(d) => d.discard_after(path, k),
        }
    }

    #[cfg(test)]
    pub(crate) fn fell_back(&self) -> bool {
        matches!(self, Detector::Multi(d) if d.fallbacks > 0)
    }
}

pub(crate) struct OneCounter {
    stamp: Vec<u32>,
    current: u32,
}

impl OneCounter {
    fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            current: 0,
        }
    }

    fn new_stamp(&mut self) {
        if self.current == u32::MAX {
            self.stamp.fill(0);
            self.current = 0;
        }
        self.current += 1;
    }

    fn begin_walk(&mut self, start: usize) {
        self.new_stamp();
        self.push(start);
    }

    #[inline]
    fn push(&mut self, v: usize) {
        self.stamp[v] = self.current;
    }

    #[inline]
    fn on_path(&self, v: usize) -> bool {
        self.stamp[v] == self.current
    }

    fn discard_after(&mut self, path: &[usize], k: usize) {
        for &u in &path[k + 1..] {
            self.stamp[u] = 0;
        }
    }
}

/// Nodes pushed between two erasures share an `id`; `val` grows with every
/// push and is never reused. A node is on the path when its `val` belongs to
/// the current walk and does not exceed the cap of its `id`. Erasing a loop
/// closed at a node `(a, b)` zeroes the caps of all later ids, lowers the cap
/// of `a` to `b`, and opens a fresh id.
///
/// When the number of ids in one walk reaches `max_ids`, the walk finishes
/// with a one-counter rebuilt from the surviving path.
pub(crate) struct MultiCounter {
    id: Vec<u32>,
    val: Vec<u64>,
    cap: Vec<u64>,
    live: Vec<u32>,
    open: u32,
    next_val: u64,
    walk_start: u64,
    max_ids: usize,
    fallback: bool,
    fallbacks: usize,
    one: OneCounter,
}

impl MultiCounter {
    fn new(n: usize, max_ids: usize) -> Self {
        Self {
            id: vec![0; n],
            val: vec![0; n],
            cap: Vec::new(),
            live: Vec::new(),
            open: 0,
            next_val: 0,
            walk_start: 1,
            max_ids: max_ids.max(1),
            fallback: false,
            fallbacks: 0,
            one: OneCounter::new(n),
        }
    }

    fn begin_walk(&mut self, start: usize) {
        self.fallback = false;
        self.walk_start = self.next_val + 1;
        self.cap.clear();
        self.cap.push(u64::MAX);
        self.live.clear();
        self.live.push(0);
        self.open = 0;
        self.push(start);
    }

    #[inline]
    fn push(&mut self, v: usize) {
        if self.fallback {
            self.one.push(v);
            return;
        }
        self.next_val += 1;
        self.id[v] = self.open;
        self.val[v] = self.next_val;
    }

    #[inline]
    fn on_path(&self, v: usize) -> bool {
        if self.fallback {
            return self.one.on_path(v);
        }
        let val = self.val[v];
        val >= self.walk_start && val <= self.cap[self.id[v] as usize]
    }

    fn discard_after(&mut self, path: &[usize], k: usize) {
        if self.fallback {
            self.one.discard_after(path, k);
            return;
        }
        let v = path[k];
        let (a, b) = (self.id[v], self.val[v]);
        while let Some(&top) = self.live.last() {
            if top <= a {
                break;
            }
            self.cap[top as usize] = 0;
            self.live.pop();
        }
        self.cap[a as usize] = b;
        if self.cap.len() >= self.max_ids {
            self.fallback = true;
            self.fallbacks += 1;
            self.one.new_stamp();
            for &u in &path[..=k] {
                self.one.push(u);
            }
            return;
        }
        self.open = self.cap.len() as u32;
        self.cap.push(u64::MAX);
        self.live.push(self.open);
    }
}
