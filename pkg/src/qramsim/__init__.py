"""Desk-scale simulator for adaptive distillation-teleportation of QRAM
resource states, with exact density-matrix verification at small qubit
counts and classical update-rule engines up to n = 24."""

__version__ = "0.1.0"

from .boolfn import (
    NEG_INF,
    AnfPolynomial,
    DataTable,
    SignedDataTable,
    anf_from_truth_table,
    degree,
    degree_signed,
    hat_function,
    load_table,
    save_table,
    shift,
    truth_table_from_anf,
    update_rule,
    update_rule_signed,
)
from .qcore import (
    DensityMatrix,
    PauliString,
    PauliSubset,
    QuantumChannel,
    StateVector,
    qram_unitary,
    resource_state,
)
from .device import (
    EncodingNoise,
    NoisyDevice,
    dead_router_device,
    noiseless_device,
    noisy_resource_state,
)
from .distill import CopySource, DistillReport
from .teleport import (
    DistillerSpec,
    ProtocolConfig,
    ProtocolTrace,
    estimate_costs,
    run_protocol,
    verify_clifford_hierarchy,
)
from .twirlset import TwirlElement, sample_twirl, twirl_dataset, twirled_state

__all__ = [
    "NEG_INF",
    "AnfPolynomial",
    "DataTable",
    "SignedDataTable",
    "anf_from_truth_table",
    "degree",
    "degree_signed",
    "hat_function",
    "load_table",
    "save_table",
    "shift",
    "truth_table_from_anf",
    "update_rule",
    "update_rule_signed",
    "DensityMatrix",
    "PauliString",
    "PauliSubset",
    "QuantumChannel",
    "StateVector",
    "qram_unitary",
    "resource_state",
    "EncodingNoise",
    "NoisyDevice",
    "dead_router_device",
    "noiseless_device",
    "noisy_resource_state",
    "CopySource",
    "DistillReport",
    "DistillerSpec",
    "ProtocolConfig",
    "ProtocolTrace",
    "estimate_costs",
    "run_protocol",
    "verify_clifford_hierarchy",
    "TwirlElement",
    "sample_twirl",
    "twirl_dataset",
    "twirled_state",
]
