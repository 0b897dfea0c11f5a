use cdfem::mesh::Side;

use crate::FemError;

/// Isotropic linear elastic material under plane strain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub youngs: f64,
    pub poisson: f64,
}

impl Material {
    pub fn new(youngs: f64, poisson: f64) -> Result<Self, FemError> {
        if !(youngs > 0.0 && youngs.is_finite()) {
            return Err(FemError::Material(format!("Young's modulus {youngs} must be positive")));
        }
        if !(0.0..0.5).contains(&poisson) {
            return Err(FemError::Material(format!("Poisson ratio {poisson} outside [0, 0.5)")));
        }
        Ok(Self { youngs, poisson })
    }

    pub fn lambda(&self) -> f64 {
        let (e, nu) = (self.youngs, self.poisson);
        e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    }

    pub fn mu(&self) -> f64 {
        self.youngs / (2.0 * (1.0 + self.poisson))
    }

    /// Kolosov constant `3 - 4ν`.
    pub fn kolosov(&self) -> f64 {
        3.0 - 4.0 * self.poisson
    }

    /// Stiffness in Voigt notation `(εxx, εyy, γxy)`.
    pub fn stiffness(&self) -> [[f64; 3]; 3] {
        let (l, m) = (self.lambda(), self.mu());
        [[l + 2.0 * m, l, 0.0], [l, l + 2.0 * m, 0.0], [0.0, 0.0, m]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialRegion {
    pub side: Side,
    pub material: Material,
}

/// Material per interface side. Elements on a side without a material are
/// left out of assembly and error integration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Materials {
    regions: Vec<MaterialRegion>,
}

impl Materials {
    pub fn uniform(material: Material) -> Self {
        Self::default().with(Side::Minus, material).with(Side::Plus, material)
    }

    pub fn with(mut self, side: Side, material: Material) -> Self {
        self.regions.retain(|r| r.side != side);
        self.regions.push(MaterialRegion { side, material });
        self
    }

    pub fn get(&self, side: Side) -> Option<&Material> {
        self.regions.iter().find(|r| r.side == side).map(|r| &r.material)
    }

    pub fn regions(&self) -> &[MaterialRegion] {
        &self.regions
    }

    /// Same materials with the side tags exchanged.
    pub fn swapped(&self) -> Self {
        Self { regions: self.regions.iter().map(|r| MaterialRegion { side: r.side.flipped(), ..*r }).collect() }
    }
}
