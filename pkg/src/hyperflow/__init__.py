"""Hypergraph influence-flow embeddings for social environments."""

from .graph import (GraphError, Hypergraph, IncidenceMatrix, LineGraph, build_incidence,
                    default_weights, pairwise_adjacency)
from .environments import (extract_hyperedges, fit_membership, hyperedges_from_clusters,
                           hyperedges_from_communities, hyperedges_from_khop)
from .linegraph import (bernoulli_line_graph, exact_similarity, random_walk_multiset,
                        sample_line_edges)
from .model import ModelConfig, ModelParams, Operators, embed, forward, theta, theta_sum
from .training import TrainConfig, dual_contrastive_loss, sample_pairs, train, train_with_task
from .metrics import conformity, equivalence, evolving_ratio, group_entropy

__version__ = "0.1.0"
