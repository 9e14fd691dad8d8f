"""Finite element neural network method for one-dimensional differential equations.

A scalar network is trained so that its element-wise Petrov-Galerkin residuals,
computed from Gauss-Legendre filter banks and exact input-derivative jets,
vanish on a 1D mesh.
"""
from .basis import build_filter_bank, hermite_cubic_space, lagrange_space, make_space
from .diffnet import (
    DiffNet,
    NetConfig,
    dof_count,
    forward_jets,
    init_network,
    load_checkpoint,
    param_gradient,
    save_checkpoint,
)
from .harness import RunConfig, RunReport, compute_metrics, refine_loop, run_case
from .kernel import BACKEND
from .mesh import Mesh, coarsen, refine, uniform_mesh
from .optim import Schedule, adam_step, lbfgs_run, train
from .problems import PROBLEMS, get_problem
from .quadrature import gauss_legendre, min_points_for_degree
from .weakform import WeakFormLoss, boundary_loss, element_residual, residual_loss

__version__ = "0.1.0"
