#!/usr/bin/env python3
from expertpc._app import app, get_root_dir, get_root_path, read_config
from expertpc._citest import (ChiSquare, CitEngine, CitError, CitKind,
                              CitOutcome, DegenerateColumn, FisherZ, NoData,
                              NoisyChannelCit, OracleCit, PredrawnChannelCit,
                              SampleTooSmall, SingularCorrelation,
                              SpecificityViolated, chi_square, fisher_z,
                              make_engine, noisy_channel_cit, oracle_cit)
from expertpc._config import ConfigError, ConfigNotFoundError, SweepConfig
from expertpc._core import ExpertPcError
from expertpc._discovery import (Algorithm, DiscoveryError, DiscoveryResult,
                                 RuleKind, SweepOrder, ValidityRule,
                                 edge_loop, edge_prune, expert_only,
                                 gpc_baseline, gpc_guess, pc_guess,
                                 pc_skeleton, pc_stable, rpc_approx,
                                 run_algorithm)
from expertpc._experiments import (SweepReport, SweepRow, emit_report,
                                   load_report_json, run_sweep)
from expertpc._expert import (EdgeOrder, ExpertError, ExpertPrediction,
                              GuidedSubsets, ParseError, UniformSubsets,
                              UnknownVariableName, extract_orderings,
                              parse_expert_response, predict_dsep,
                              simulate_edge_expert)
from expertpc._graphs import (CycleDetected, Dag, EdgeListError, GraphError,
                              IndexOutOfRange, SelfLoop, Skeleton,
                              complete_skeleton, d_separated,
                              d_separated_by_paths, new_dag, read_dag,
                              sample_er_dag, skeleton_of, write_edge_list)
from expertpc._metrics import (AuditPreconditionError, DimensionMismatch,
                               MetricError, TooLarge, estimate_phi,
                               exact_phi_small, expected_exact_phi,
                               monotonicity_audit, perfect_recovery,
                               runtime_audit, skeleton_f1)
from expertpc._synthdata import (DataError, Dataset, EmptyFile, NTooLarge,
                                 NonNumericCell, RaggedRows, ZeroVariance,
                                 load_csv, load_sachs_truth, permute_variables,
                                 sample_dataset, sample_weights, standardize)

__all__ = [
    'app',
    'get_root_dir',
    'get_root_path',
    'read_config',
    'ExpertPcError',
    'GraphError',
    'CycleDetected',
    'IndexOutOfRange',
    'SelfLoop',
    'EdgeListError',
    'Dag',
    'Skeleton',
    'new_dag',
    'skeleton_of',
    'complete_skeleton',
    'd_separated',
    'd_separated_by_paths',
    'sample_er_dag',
    'read_dag',
    'write_edge_list',
    'DataError',
    'ZeroVariance',
    'RaggedRows',
    'NonNumericCell',
    'EmptyFile',
    'NTooLarge',
    'Dataset',
    'sample_weights',
    'sample_dataset',
    'standardize',
    'permute_variables',
    'load_csv',
    'load_sachs_truth',
    'CitError',
    'SampleTooSmall',
    'SingularCorrelation',
    'DegenerateColumn',
    'NoData',
    'SpecificityViolated',
    'CitOutcome',
    'CitKind',
    'CitEngine',
    'FisherZ',
    'ChiSquare',
    'OracleCit',
    'NoisyChannelCit',
    'PredrawnChannelCit',
    'fisher_z',
    'chi_square',
    'oracle_cit',
    'noisy_channel_cit',
    'make_engine',
    'ExpertError',
    'UnknownVariableName',
    'ParseError',
    'ExpertPrediction',
    'EdgeOrder',
    'UniformSubsets',
    'GuidedSubsets',
    'simulate_edge_expert',
    'predict_dsep',
    'extract_orderings',
    'parse_expert_response',
    'DiscoveryError',
    'Algorithm',
    'RuleKind',
    'SweepOrder',
    'ValidityRule',
    'DiscoveryResult',
    'edge_prune',
    'edge_loop',
    'pc_skeleton',
    'pc_guess',
    'gpc_guess',
    'gpc_baseline',
    'pc_stable',
    'rpc_approx',
    'expert_only',
    'run_algorithm',
    'MetricError',
    'DimensionMismatch',
    'TooLarge',
    'AuditPreconditionError',
    'skeleton_f1',
    'perfect_recovery',
    'estimate_phi',
    'exact_phi_small',
    'expected_exact_phi',
    'monotonicity_audit',
    'runtime_audit',
    'ConfigError',
    'ConfigNotFoundError',
    'SweepConfig',
    'SweepRow',
    'SweepReport',
    'run_sweep',
    'emit_report',
    'load_report_json',
]
