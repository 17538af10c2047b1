#pragma once

#include "noisere/tape.hpp"
#include "noisere/tensor.hpp"

namespace noisere {

// Transition-matrix heads. Every function returns a row-stochastic [C x C]
// matrix node: entry (i, j) is the probability that the DS label is j given
// that the true relation is i.

// x_n = tanh(A x + a): the embedding used specifically for noise modeling.
inline Var noise_embedding(Tape& tape, Var proj_weight, Var proj_bias, Var x) {
  return tape.tanh(tape.add(tape.matvec(proj_weight, x), proj_bias));
}

// Sentence-level dynamic transition matrix. pair_weights is [C*C x d_n]
// (row i*C+j holds w_ij, shared across the dataset); scalar_bias is the
// shared scalar b. The bias is constant across each row's softmax and thus
// analytically inert; it is kept for fidelity to the formulation.
inline Var sentence_transition(Tape& tape, Var pair_weights, Var scalar_bias, Var x_n,
                               int relation_count) {
  auto logits_flat = tape.add_scalar_broadcast(tape.matvec(pair_weights, x_n), scalar_bias);
  auto logits = tape.reshape(logits_flat, {relation_count, relation_count});
  return tape.row_softmax(logits);
}

// Bag-level dynamic transition matrix. Row i is a softmax over j of
// s_i . r'_j + b_i, where s_i is the bag embedding for relation i built
// with the separate noise-side relation embeddings r'.
inline Var bag_transition(Tape& tape, Var per_relation_bag_embeddings, Var noise_relation_embed,
                          Var row_bias) {
  auto logits = tape.add_col_broadcast(
      tape.matmul_nt(per_relation_bag_embeddings, noise_relation_embed), row_bias);
  return tape.row_softmax(logits);
}

// Global transition matrix: softmax over each row of the trainable T'
// (initialized to the identity).
inline Var global_transition(Tape& tape, Var raw) { return tape.row_softmax(raw); }

// o = T^T p, renormalized as a numerical safeguard (analytically the
// product already sums to 1 when T is row-stochastic and p a distribution).
inline Var observed_distribution(Tape& tape, Var transition, Var p) {
  return tape.normalize_sum(tape.matvec_t(transition, p));
}

inline Var trace_of(Tape& tape, Var transition) { return tape.trace(transition); }

}  // namespace noisere
