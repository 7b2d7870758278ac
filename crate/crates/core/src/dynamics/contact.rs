use serde::{Deserialize, Serialize};

use crate::Axes;

/// Penalty contact against a horizontal surface (normal along +z).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContactModel {
    #[default]
    None,
    Balloon {
        surface_height: f64,
        stiffness: f64,
        rupture_force: f64,
        #[serde(default)]
        ruptured: bool,
    },
    RigidTable {
        surface_height: f64,
        stiffness: f64,
        damping: f64,
    },
}

impl ContactModel {
    /// Force on the robot for the current model state. Pure; never ruptures.
    pub fn force(&self, x: &Axes, xdot: &Axes) -> Axes {
        match *self {
            ContactModel::None => Axes::zeros(),
            ContactModel::Balloon {
                surface_height,
                stiffness,
                ruptured,
                ..
            } => {
                if ruptured {
                    return Axes::zeros();
                }
                let pen = (surface_height - x.z).max(0.0);
                Axes::new(0.0, 0.0, stiffness * pen)
            }
            ContactModel::RigidTable {
                surface_height,
                stiffness,
                damping,
            } => {
                let pen = surface_height - x.z;
                if pen <= 0.0 {
                    return Axes::zeros();
                }
                // never adhesive
                Axes::new(0.0, 0.0, (stiffness * pen - damping * xdot.z).max(0.0))
            }
        }
    }

    /// Evaluate the force and latch rupture once the balloon force exceeds
    /// its threshold. The exceeding force is still returned on that call.
    pub fn contact_force(&mut self, x: &Axes, xdot: &Axes) -> Axes {
        let f = self.force(x, xdot);
        if let ContactModel::Balloon {
            rupture_force,
            ref mut ruptured,
            ..
        } = *self
        {
            if !*ruptured && f.z > rupture_force {
                *ruptured = true;
            }
        }
        f
    }

    pub fn is_ruptured(&self) -> bool {
        matches!(self, ContactModel::Balloon { ruptured: true, .. })
    }

    pub fn validate(&self) -> Result<(), String> {
        let check = |name: &str, v: f64, positive: bool| {
            if !v.is_finite() || v < 0.0 || (positive && v == 0.0) {
                Err(format!("contact.{name} invalid: {v}"))
            } else {
                Ok(())
            }
        };
        match *self {
            ContactModel::None => Ok(()),
            ContactModel::Balloon {
                surface_height,
                stiffness,
                rupture_force,
                ..
            } => {
                if !surface_height.is_finite() {
                    return Err("contact.surface_height not finite".into());
                }
                check("stiffness", stiffness, true)?;
                check("rupture_force", rupture_force, true)
            }
            ContactModel::RigidTable {
                surface_height,
                stiffness,
                damping,
            } => {
                if !surface_height.is_finite() {
                    return Err("contact.surface_height not finite".into());
                }
                check("stiffness", stiffness, true)?;
                check("damping", damping, false)
            }
        }
    }
}
