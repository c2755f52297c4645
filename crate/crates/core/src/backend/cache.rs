use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use super::{CacheHandle, TokenId};
use crate::error::{Error, Result};

pub const DEFAULT_CACHE_CAPACITY: usize = 4096;

/// Bounded store of per-prefix backend state with least-recently-used
/// eviction. Lookups validate that the handle still refers to the same
/// covered sequence.
pub struct PrefixCache<S> {
    capacity: usize,
    inner: Mutex<Inner<S>>,
}

struct Inner<S> {
    next_id: u64,
    tick: u64,
    entries: HashMap<u64, Entry<S>>,
    recency: BTreeMap<u64, u64>,
}

struct Entry<S> {
    covered: Arc<[TokenId]>,
    state: S,
    last_used: u64,
}

impl<S: Clone> PrefixCache<S> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            inner: Mutex::new(Inner {
                next_id: 1,
                tick: 0,
                entries: HashMap::new(),
                recency: BTreeMap::new(),
            }),
        }
    }

    pub fn insert(&self, covered: Arc<[TokenId]>, state: S) -> CacheHandle {
        let mut inner = self.inner.lock().unwrap();
        while inner.entries.len() >= self.capacity {
            let Some((&tick, &victim)) = inner.recency.iter().next() else {
                break;
            };
            inner.recency.remove(&tick);
            inner.entries.remove(&victim);
        }
        let id = inner.next_id;
        inner.next_id += 1;
        inner.tick += 1;
        let tick = inner.tick;
        inner.recency.insert(tick, id);
        inner.entries.insert(
            id,
            Entry {
                covered: covered.clone(),
                state,
                last_used: tick,
            },
        );
        CacheHandle::new(id, covered)
    }

    pub fn get(&self, handle: &CacheHandle) -> Result<S> {
        let mut inner = self.inner.lock().unwrap();
        inner.tick += 1;
        let tick = inner.tick;
        let Inner { entries, recency, .. } = &mut *inner;
        let entry = entries
            .get_mut(&handle.id())
            .filter(|e| *e.covered == *handle.covered_tokens())
            .ok_or(Error::CacheMiss(handle.id()))?;
        recency.remove(&entry.last_used);
        entry.last_used = tick;
        recency.insert(tick, handle.id());
        Ok(entry.state.clone())
    }

    pub fn remove(&self, handle: &CacheHandle) {
        let mut inner = self.inner.lock().unwrap();
        if let Some(entry) = inner.entries.remove(&handle.id()) {
            inner.recency.remove(&entry.last_used);
        }
    }

    pub fn clear(&self) {
        let mut inner = self.inner.lock().unwrap();
        inner.entries.clear();
        inner.recency.clear();
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(ids: &[u64]) -> Arc<[TokenId]> {
        ids.iter().map(|&i| TokenId(i)).collect()
    }

    #[test]
    fn least_recently_used_entry_is_evicted() {
        let cache = PrefixCache::new(2);
        let a = cache.insert(seq(&[1]), 'a');
        let b = cache.insert(seq(&[2]), 'b');
        assert_eq!(cache.get(&a).unwrap(), 'a');
        let c = cache.insert(seq(&[3]), 'c');
        assert!(matches!(cache.get(&b), Err(Error::CacheMiss(_))));
        assert_eq!(cache.get(&a).unwrap(), 'a');
        assert_eq!(cache.get(&c).unwrap(), 'c');
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn removed_and_cleared_handles_miss() {
        let cache = PrefixCache::new(8);
        let a = cache.insert(seq(&[1, 2]), ());
        let b = cache.insert(seq(&[1]), ());
        cache.remove(&a);
        assert!(cache.get(&a).is_err());
        assert!(cache.get(&b).is_ok());
        cache.clear();
        assert!(cache.get(&b).is_err());
        assert!(cache.is_empty());
    }

    #[test]
    fn forged_handle_with_other_tokens_misses() {
        let cache = PrefixCache::new(8);
        let a = cache.insert(seq(&[1, 2]), ());
        let forged = CacheHandle::new(a.id(), seq(&[9]));
        assert!(cache.get(&forged).is_err());
    }
}
