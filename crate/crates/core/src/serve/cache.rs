//! Prediction cache with least-recently-used eviction and a time-to-live.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub capacity: usize,
    /// Entries strictly older than this (seconds since insertion) are absent.
    pub ttl_seconds: f64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig { capacity: 1000, ttl_seconds: 300.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lookup<V> {
    Hit(V),
    Miss,
}

#[derive(Debug, Clone)]
struct Slot<V> {
    value: V,
    inserted: f64,
    stamp: u64,
}

/// Recency is tracked by a monotone stamp, so ties in virtual time still
/// order accesses.
#[derive(Debug, Clone)]
pub struct LruTtlCache<K, V> {
    config: CacheConfig,
    slots: HashMap<K, Slot<V>>,
    recency: BTreeMap<u64, K>,
    next_stamp: u64,
    hits: u64,
    misses: u64,
}

impl<K: Hash + Eq + Clone, V: Clone> LruTtlCache<K, V> {
    pub fn new(config: CacheConfig) -> Self {
        LruTtlCache {
            config,
            slots: HashMap::new(),
            recency: BTreeMap::new(),
            next_stamp: 0,
            hits: 0,
            misses: 0,
        }
    }

    pub fn config(&self) -> CacheConfig {
        self.config
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    fn expired(&self, inserted: f64, now: f64) -> bool {
        now - inserted > self.config.ttl_seconds
    }

    fn touch(&mut self, key: &K) {
        let stamp = self.next_stamp;
        self.next_stamp += 1;
        let slot = self.slots.get_mut(key).expect("touched key is present");
        self.recency.remove(&slot.stamp);
        slot.stamp = stamp;
        self.recency.insert(stamp, key.clone());
    }

    fn remove(&mut self, key: &K) {
        if let Some(slot) = self.slots.remove(key) {
            self.recency.remove(&slot.stamp);
        }
    }

    pub fn get(&mut self, key: &K, now: f64) -> Lookup<V> {
        let state = self.slots.get(key).map(|s| self.expired(s.inserted, now));
        match state {
            Some(false) => {
                self.hits += 1;
                self.touch(key);
                Lookup::Hit(self.slots[key].value.clone())
            }
            Some(true) => {
                self.misses += 1;
                self.remove(key);
                Lookup::Miss
            }
            None => {
                self.misses += 1;
                Lookup::Miss
            }
        }
    }

    /// Inserts or refreshes `key`. At capacity, expired entries are purged
    /// first and then the least recently used live entry is evicted.
    pub fn put(&mut self, key: K, value: V, now: f64) {
        if self.config.capacity == 0 {
            return;
        }
        if let Some(slot) = self.slots.get_mut(&key) {
            slot.value = value;
            slot.inserted = now;
            self.touch(&key);
            return;
        }
        if self.slots.len() >= self.config.capacity {
            let stale: Vec<K> = self
                .slots
                .iter()
                .filter(|(_, s)| self.expired(s.inserted, now))
                .map(|(k, _)| k.clone())
                .collect();
            for k in &stale {
                self.remove(k);
            }
        }
        if self.slots.len() >= self.config.capacity {
            let (_, lru) = self.recency.pop_first().expect("full cache has entries");
            self.slots.remove(&lru);
        }
        let stamp = self.next_stamp;
        self.next_stamp += 1;
        self.recency.insert(stamp, key.clone());
        self.slots.insert(key, Slot { value, inserted: now, stamp });
    }
}
