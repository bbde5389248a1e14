"""Gromov-Wasserstein factorization of graphs."""

from .analysis import ClusterResult, clustering_accuracy, gwb_km, kmeans
from .barycenter import BarycenterState, gwb
from .data import Dataset, generate_ba, generate_sbm, load_tudataset, symmetrize, write_tudataset
from .graph import (
    AtomParams,
    Coupling,
    EmbeddingParams,
    Graph,
    ShapeError,
    assemble_cost_const,
    feature_distance,
    gw_cost,
    map_atom,
    map_weights,
)
from .model import (
    AdamState,
    Classifier,
    GwfModel,
    TrainConfig,
    adam_step,
    backward,
    forward_loss,
    load_model,
    save_model,
    train,
    train_semisupervised,
)
from .solvers import SolverConfig, SolverKind, SolverResult, gwd, gwd_badmm, gwd_ppa

__version__ = "0.1.0"
