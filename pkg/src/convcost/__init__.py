"""convcost: CNN backbone cost analyzer and reference micro-engine.

Builds OSA / dense-block / residual topologies as an explicit computation
graph, prices them analytically (memory access cost, FLOPs, parameters,
activation footprint, energy-per-image metrics), and verifies the
architectural claims numerically with a deterministic forward/backward
engine at desk scale.
"""

from .graph import (
    Add, AvgPool, BatchNorm, Concat, Conv, GlobalAvgPool, Graph, GraphBuilder,
    GraphError, Input, Linear, MaxPool, Node, ReLU, ShapeError, TensorShape,
    Violation, graph_from_json, graph_to_json, infer_channels, infer_shapes,
    load_graph, save_graph, topo_order, validate,
)
from .cost import (
    CostError, CostReport, EfficiencyReport, LayerCost, PowerLog,
    average_power, conv_mac, efficiency_from_flops, efficiency_metrics,
    layer_cost, load_power_csv, mac_lower_bound, network_report,
    report_from_json, save_report_json,
)
from .zoo import (
    ARCHITECTURES, DenseBlockConfig, OsaConfig, VovVariant, build_architecture,
    build_dense_block, build_densenet40, build_osa_cifar, build_osa_module,
    build_residual_block, build_vovnet,
)
from .engine import (
    EngineError, TrainState, accuracy, backward, conv2d_direct,
    count_parameters, forward, grad_check, init_params, init_train_state,
    softmax_cross_entropy, train_loop, train_step,
)
from .weights_io import WeightsError, load_weights, save_weights
from .data import DataError, Dataset, encode_cifar10_binary, load_cifar10_binary, synthetic_batch
from .analysis import (
    AnalysisError, ConnectivityMatrix, aggregation_summary,
    connectivity_matrix, save_connectivity_csv,
)

__version__ = "0.1.0"
