//! Deterministic seed derivation.
//!
//! Every random decision in a run is driven by a seed derived from the
//! master seed and a stream identifier, so a run can be reproduced from its
//! seed ledger alone. Streams are identified by a role constant plus a fold
//! index: `stream = (role << 32) | fold`.

/// Roles for derived seed streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Partition,
    Network,
    FcmHealthy,
    FcmSick,
}

impl Role {
    pub fn id(self) -> u64 {
        match self {
            Role::Partition => 1,
            Role::Network => 2,
            Role::FcmHealthy => 3,
            Role::FcmSick => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Partition => "partition",
            Role::Network => "network",
            Role::FcmHealthy => "fcm_healthy",
            Role::FcmSick => "fcm_sick",
        }
    }
}

/// SplitMix64 finalizer; full-period mixing of a 64-bit state.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a stream seed from the master seed and a raw stream id.
pub fn derive(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

/// Derive the seed for `role` at `fold` (use fold 0 for per-run streams).
pub fn for_role(master: u64, role: Role, fold: usize) -> u64 {
    derive(master, (role.id() << 32) | fold as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct() {
        let master = 42;
        let a = for_role(master, Role::Network, 0);
        let b = for_role(master, Role::Network, 1);
        let c = for_role(master, Role::FcmHealthy, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
    }

    #[test]
    fn derivation_is_stable() {
        assert_eq!(derive(7, 1), derive(7, 1));
        assert_ne!(derive(7, 1), derive(8, 1));
    }
}
