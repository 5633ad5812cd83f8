//! Per-device DRX state machine, advanced one TTI at a time.

use crate::error::{Error, Result};

/// DRX timer configuration, all in TTIs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DrxParams {
    pub t_on: u32,
    /// Inactivity timer.
    pub t_i: u32,
    /// Short-cycle sleep, `T_s - T_on`.
    pub t_ss: u32,
    /// Long-cycle sleep, `T_l - T_on`.
    pub t_ls: u32,
    /// Number of short cycles before the long cycle.
    pub t_sc: u32,
}

impl DrxParams {
    /// Upper bound on `t_sc`; the semi-Markov chain has `2 t_sc + 3` states.
    pub const MAX_SHORT_CYCLES: u32 = 1024;

    /// Validates with the strict `T_s < T_l` rule.
    pub fn new(t_on: u32, t_i: u32, t_ss: u32, t_ls: u32, t_sc: u32) -> Result<Self> {
        let params = Self { t_on, t_i, t_ss, t_ls, t_sc };
        params.validate(false)?;
        Ok(params)
    }

    /// Checks every timer is at least one TTI and the short cycle is shorter
    /// than the long one (or equal, when `allow_equal_cycles` is set).
    pub fn validate(&self, allow_equal_cycles: bool) -> Result<()> {
        let fields = [
            ("t_on", self.t_on),
            ("t_i", self.t_i),
            ("t_ss", self.t_ss),
            ("t_ls", self.t_ls),
            ("t_sc", self.t_sc),
        ];
        for (name, v) in fields {
            if v < 1 {
                return Err(Error::invalid(format!("{name} must be at least 1 TTI")));
            }
        }
        if self.t_sc > Self::MAX_SHORT_CYCLES {
            return Err(Error::invalid(format!(
                "t_sc must not exceed {}",
                Self::MAX_SHORT_CYCLES
            )));
        }
        if self.t_on.checked_add(self.t_ls.max(self.t_ss)).is_none() {
            return Err(Error::invalid("cycle length overflows"));
        }
        let ok = if allow_equal_cycles {
            self.t_ss <= self.t_ls
        } else {
            self.t_ss < self.t_ls
        };
        if !ok {
            return Err(Error::invalid(format!(
                "short cycle ({}) must be shorter than long cycle ({})",
                self.short_cycle(),
                self.long_cycle()
            )));
        }
        Ok(())
    }

    pub fn short_cycle(&self) -> u32 {
        self.t_on + self.t_ss
    }

    pub fn long_cycle(&self) -> u32 {
        self.t_on + self.t_ls
    }

    /// Number of semi-Markov states, `2 t_sc + 3`.
    pub fn n_states(&self) -> usize {
        2 * self.t_sc as usize + 3
    }
}

/// Coarse mode, used as the key for occupancy accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeKind {
    ActiveRx,
    ShortOn,
    ShortSleep,
    LongOn,
    LongSleep,
}

impl ModeKind {
    pub const ALL: [ModeKind; 5] = [
        ModeKind::ActiveRx,
        ModeKind::ShortOn,
        ModeKind::ShortSleep,
        ModeKind::LongOn,
        ModeKind::LongSleep,
    ];

    pub fn is_listening(self) -> bool {
        !self.is_sleep()
    }

    pub fn is_sleep(self) -> bool {
        matches!(self, ModeKind::ShortSleep | ModeKind::LongSleep)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeKind::ActiveRx => "active_rx",
            ModeKind::ShortOn => "short_on",
            ModeKind::ShortSleep => "short_sleep",
            ModeKind::LongOn => "long_on",
            ModeKind::LongSleep => "long_sleep",
        }
    }
}

/// Device mode together with the residual of the running timer. Residuals
/// count the TTIs left in the phase including the current one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviceMode {
    ActiveRx { it_remaining: u32 },
    ShortOn { cycle: u32, remaining: u32 },
    ShortSleep { cycle: u32, remaining: u32 },
    LongOn { remaining: u32 },
    LongSleep { remaining: u32 },
}

impl DeviceMode {
    pub fn kind(&self) -> ModeKind {
        match self {
            DeviceMode::ActiveRx { .. } => ModeKind::ActiveRx,
            DeviceMode::ShortOn { .. } => ModeKind::ShortOn,
            DeviceMode::ShortSleep { .. } => ModeKind::ShortSleep,
            DeviceMode::LongOn { .. } => ModeKind::LongOn,
            DeviceMode::LongSleep { .. } => ModeKind::LongSleep,
        }
    }

    pub fn is_listening(&self) -> bool {
        self.kind().is_listening()
    }

    /// Index of the matching semi-Markov state `S_k`.
    pub fn state_index(&self, params: &DrxParams) -> usize {
        let long_on = 2 * params.t_sc as usize + 1;
        match *self {
            DeviceMode::ActiveRx { .. } => 0,
            DeviceMode::ShortOn { cycle, .. } => 2 * cycle as usize - 1,
            DeviceMode::ShortSleep { cycle, .. } => 2 * cycle as usize,
            DeviceMode::LongOn { .. } => long_on,
            DeviceMode::LongSleep { .. } => long_on + 1,
        }
    }

    pub fn is_consistent(&self, params: &DrxParams) -> bool {
        let within = |r: u32, hi: u32| (1..=hi).contains(&r);
        let cycle_ok = |c: u32| (1..=params.t_sc).contains(&c);
        match *self {
            DeviceMode::ActiveRx { it_remaining } => within(it_remaining, params.t_i),
            DeviceMode::ShortOn { cycle, remaining } => cycle_ok(cycle) && within(remaining, params.t_on),
            DeviceMode::ShortSleep { cycle, remaining } => {
                cycle_ok(cycle) && within(remaining, params.t_ss)
            }
            DeviceMode::LongOn { remaining } => within(remaining, params.t_on),
            DeviceMode::LongSleep { remaining } => within(remaining, params.t_ls),
        }
    }
}

/// What the device observes on the control channel during one TTI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TickInput {
    /// Data scheduled for the device in this TTI.
    pub pdcch_grant: bool,
    /// The base station asks for the inactivity timer to be restarted.
    /// Only meaningful together with a grant.
    pub it_reset_indicated: bool,
}

impl TickInput {
    pub const IDLE: TickInput = TickInput {
        pdcch_grant: false,
        it_reset_indicated: false,
    };

    pub fn grant(reset: bool) -> Self {
        Self {
            pdcch_grant: true,
            it_reset_indicated: reset,
        }
    }
}

/// Initial mode: continuous reception with a full inactivity timer.
pub fn init(params: &DrxParams) -> DeviceMode {
    DeviceMode::ActiveRx {
        it_remaining: params.t_i,
    }
}

/// Advances the device by one TTI.
///
/// Returns the mode for the next TTI and whether the device was listening to
/// the control channel during this one. Grants are ignored while asleep.
///
/// In continuous reception a grant with a reset indication reloads the
/// inactivity timer (this wins over an expiry in the same TTI); a grant
/// without one lets the timer keep counting down. A grant during an
/// on-duration always enters continuous reception with a full timer.
pub fn tick(mode: DeviceMode, input: TickInput, params: &DrxParams) -> (DeviceMode, bool) {
    debug_assert!(mode.is_consistent(params), "{mode:?} inconsistent with {params:?}");
    debug_assert!(!input.it_reset_indicated || input.pdcch_grant);

    let reload = DeviceMode::ActiveRx {
        it_remaining: params.t_i,
    };
    match mode {
        DeviceMode::ActiveRx { it_remaining } => {
            let next = if input.pdcch_grant && input.it_reset_indicated {
                reload
            } else if it_remaining > 1 {
                DeviceMode::ActiveRx {
                    it_remaining: it_remaining - 1,
                }
            } else {
                DeviceMode::ShortOn {
                    cycle: 1,
                    remaining: params.t_on,
                }
            };
            (next, true)
        }
        DeviceMode::ShortOn { cycle, remaining } => {
            let next = if input.pdcch_grant {
                reload
            } else if remaining > 1 {
                DeviceMode::ShortOn {
                    cycle,
                    remaining: remaining - 1,
                }
            } else {
                DeviceMode::ShortSleep {
                    cycle,
                    remaining: params.t_ss,
                }
            };
            (next, true)
        }
        DeviceMode::LongOn { remaining } => {
            let next = if input.pdcch_grant {
                reload
            } else if remaining > 1 {
                DeviceMode::LongOn {
                    remaining: remaining - 1,
                }
            } else {
                DeviceMode::LongSleep {
                    remaining: params.t_ls,
                }
            };
            (next, true)
        }
        DeviceMode::ShortSleep { cycle, remaining } => {
            let next = if remaining > 1 {
                DeviceMode::ShortSleep {
                    cycle,
                    remaining: remaining - 1,
                }
            } else if cycle < params.t_sc {
                DeviceMode::ShortOn {
                    cycle: cycle + 1,
                    remaining: params.t_on,
                }
            } else {
                DeviceMode::LongOn {
                    remaining: params.t_on,
                }
            };
            (next, false)
        }
        DeviceMode::LongSleep { remaining } => {
            let next = if remaining > 1 {
                DeviceMode::LongSleep {
                    remaining: remaining - 1,
                }
            } else {
                DeviceMode::LongOn {
                    remaining: params.t_on,
                }
            };
            (next, false)
        }
    }
}
