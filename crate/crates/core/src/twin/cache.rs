//! Capacity-bounded LRU cache with hit/miss counters.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub len: usize,
    pub capacity: usize,
}

struct Inner<K, V> {
    entries: HashMap<K, (Arc<V>, u64)>,
    // recency tick -> key, oldest first
    order: BTreeMap<u64, K>,
    tick: u64,
}

/// All operations take one short lock, so the get/put contract is
/// linearizable. Values are shared as `Arc`s; a hit returns the very
/// object that was inserted.
pub struct LruCache<K, V> {
    inner: Mutex<Inner<K, V>>,
    capacity: usize,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<K: Eq + Hash + Clone, V> LruCache<K, V> {
    /// A capacity of zero disables caching (every `get` misses).
    pub fn new(capacity: usize) -> Self {
        LruCache {
            inner: Mutex::new(Inner { entries: HashMap::new(), order: BTreeMap::new(), tick: 0 }),
            capacity,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn get(&self, key: &K) -> Option<Arc<V>> {
        let mut inner = self.inner.lock();
        inner.tick += 1;
        let tick = inner.tick;
        let Inner { entries, order, .. } = &mut *inner;
        match entries.get_mut(key) {
            Some((value, last)) => {
                order.remove(last);
                *last = tick;
                order.insert(tick, key.clone());
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(value.clone())
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    pub fn put(&self, key: K, value: Arc<V>) {
        if self.capacity == 0 {
            return;
        }
        let mut inner = self.inner.lock();
        inner.tick += 1;
        let tick = inner.tick;
        let Inner { entries, order, .. } = &mut *inner;
        if let Some((_, last)) = entries.insert(key.clone(), (value, tick)) {
            order.remove(&last);
        }
        order.insert(tick, key);
        while entries.len() > self.capacity {
            let (_, oldest) = order.pop_first().expect("order tracks every entry");
            entries.remove(&oldest);
        }
    }

    /// Returns the cached value or computes, stores and returns it.
    pub fn get_or_insert_with<E>(&self, key: K, make: impl FnOnce() -> Result<V, E>) -> Result<Arc<V>, E> {
        if let Some(v) = self.get(&key) {
            return Ok(v);
        }
        let value = Arc::new(make()?);
        self.put(key, value.clone());
        Ok(value)
    }

    pub fn clear(&self) {
        let mut inner = self.inner.lock();
        inner.entries.clear();
        inner.order.clear();
    }

    pub fn reset_stats(&self) {
        self.hits.store(0, Ordering::Relaxed);
        self.misses.store(0, Ordering::Relaxed);
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            len: self.inner.lock().entries.len(),
            capacity: self.capacity,
        }
    }
}
