//! End-to-end solve of the gap problem in globally flattened coordinates.

use std::path::Path;

use thiserror::Error;

use crate::discretize::{
    assemble, build_graded_grid, dirichlet_trace, evaluate_coefficients, BoundaryData,
    BoundaryFaces, CellSampling, DiscreteField, DiscretizeError, GridSpec, LinearSystem,
};
use crate::geometry::{GapGeometry, GeometryError};
use crate::solve::{cg_solve, SolveError, SolveReport, SolverConfig};
use crate::transform::{
    CoefficientField, FlattenMap, InjectedFault, PushforwardField, TransformError,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct GapProblem {
    pub geometry: GapGeometry,
    pub coefficient: CoefficientField,
    pub boundary: BoundaryData,
    /// Lateral half width and resolution; the vertical extent is that of the global map.
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub fault: Option<InjectedFault>,
}

/// Solution `w` on the flattened slab `|z_n| ≤ 1` together with its map.
#[derive(Debug, Clone)]
pub struct GapSolution {
    pub map: FlattenMap,
    pub field: DiscreteField,
    pub report: SolveReport,
}

impl GapProblem {
    pub fn discretize(
        &self,
    ) -> Result<(FlattenMap, crate::discretize::TensorGrid, LinearSystem), ProblemError> {
        let map = FlattenMap::global(self.geometry.clone());
        let spec = GridSpec {
            half_height: 1.0,
            ..self.grid.clone()
        };
        let grid = build_graded_grid(&self.geometry, &spec)?;
        let mut push = PushforwardField::new(&self.coefficient, &map);
        if let Some(f) = self.fault {
            push = push.with_fault(f);
        }
        let cells =
            evaluate_coefficients(&grid, CellSampling::Center, self.solver.parallel, |z| {
                push.at(z)
            })?;
        let faces = BoundaryFaces::gap(self.geometry.dim);
        let dir = dirichlet_trace(&self.boundary, &map, &grid, &faces)?;
        let sys = assemble(&grid, &cells, &dir, self.solver.parallel)?;
        Ok((map, grid, sys))
    }

    /// Discretizes and solves; with `dump` set the grid and system are written there first.
    pub fn solve(&self, dump: Option<&Path>) -> Result<GapSolution, ProblemError> {
        let (map, grid, sys) = self.discretize()?;
        if let Some(dir) = dump {
            std::fs::create_dir_all(dir)?;
            let tag = format!("eps{:e}", self.geometry.epsilon);
            grid.dump(&dir.join(format!("grid_{tag}.bin")))?;
            sys.dump(&dir.join(format!("system_{tag}.bin")))?;
        }
        let (w, report) = cg_solve(&sys, None, &self.solver)?;
        drop(sys);
        Ok(GapSolution {
            map,
            field: DiscreteField::new(grid, w),
            report,
        })
    }
}
