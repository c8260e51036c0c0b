use std::collections::HashMap;
use std::ops::{Deref, DerefMut};
use std::sync::{Arc, Mutex};

use tokio::sync::OwnedMutexGuard;

use super::sim::{RobotSim, RobotState};
use super::RobotError;

type Snapshots = Arc<Mutex<HashMap<String, RobotState>>>;

/// Hands out exclusive leases on named robots.
#[derive(Default, Clone)]
pub struct RobotRegistry {
    robots: Arc<Mutex<HashMap<String, Arc<tokio::sync::Mutex<RobotSim>>>>>,
    snapshots: Snapshots,
}

impl RobotRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, id: &str, sim: RobotSim) {
        self.snapshots
            .lock()
            .unwrap()
            .insert(id.to_string(), sim.state().clone());
        self.robots
            .lock()
            .unwrap()
            .insert(id.to_string(), Arc::new(tokio::sync::Mutex::new(sim)));
    }

    pub fn ids(&self) -> Vec<String> {
        let mut v: Vec<_> = self.robots.lock().unwrap().keys().cloned().collect();
        v.sort();
        v
    }

    /// Fails with `ROBOT_LEASED` rather than waiting.
    pub fn lease(&self, id: &str) -> Result<RobotLease, RobotError> {
        let cell = self
            .robots
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| RobotError::UnknownRobot(id.to_string()))?;
        let guard = cell
            .try_lock_owned()
            .map_err(|_| RobotError::Leased(id.to_string()))?;
        Ok(RobotLease {
            id: id.to_string(),
            guard,
            snapshots: self.snapshots.clone(),
        })
    }

    /// State as of the last released lease.
    pub fn snapshot(&self, id: &str) -> Option<RobotState> {
        self.snapshots.lock().unwrap().get(id).cloned()
    }
}

pub struct RobotLease {
    id: String,
    guard: OwnedMutexGuard<RobotSim>,
    snapshots: Snapshots,
}

impl RobotLease {
    pub fn id(&self) -> &str {
        &self.id
    }
}

impl Deref for RobotLease {
    type Target = RobotSim;

    fn deref(&self) -> &RobotSim {
        &self.guard
    }
}

impl DerefMut for RobotLease {
    fn deref_mut(&mut self) -> &mut RobotSim {
        &mut self.guard
    }
}

impl Drop for RobotLease {
    fn drop(&mut self) {
        if let Ok(mut map) = self.snapshots.lock() {
            map.insert(self.id.clone(), self.guard.state().clone());
        }
    }
}
