#pragma once

#include <string>
#include <utility>
#include <vector>

#include "noisere/encoder.hpp"
#include "noisere/errors.hpp"
#include "noisere/tape.hpp"

namespace noisere {

// All sentences sharing one entity pair under one DS label.
struct Bag {
  std::vector<SentenceInstance> sentences;
  std::pair<std::string, std::string> entity_pair;
  int ds_label = 0;
  int true_label = -1;  // synthetic corpora only

  int size() const { return static_cast<int>(sentences.size()); }
};

// Arithmetic mean of the sentence embeddings.
inline Var average_aggregate(Tape& tape, const std::vector<Var>& sentence_embeddings) {
  if (sentence_embeddings.empty()) throw DataError("average_aggregate: empty bag");
  return tape.mean_rows(tape.stack_rows(sentence_embeddings));
}

struct AttentionResult {
  Var per_relation;  // [C x d]: row j is the bag embedding for relation j
  Var weights;       // [C x n]: row j is the attention distribution over sentences
};

// Dot-product attention: a_ij = softmax_i(x_i . r_j), s_j = sum_i a_ij x_i.
inline AttentionResult attention_aggregate(Tape& tape,
                                           const std::vector<Var>& sentence_embeddings,
                                           Var relation_embed) {
  if (sentence_embeddings.empty()) throw DataError("attention_aggregate: empty bag");
  auto X = tape.stack_rows(sentence_embeddings);        // n x d
  auto scores = tape.matmul_nt(relation_embed, X);      // C x n
  auto weights = tape.row_softmax(scores);              // C x n
  auto per_relation = tape.matmul(weights, X);          // C x d
  return {per_relation, weights};
}

// Average mode: p = softmax(W s + bias), identical to the sentence-level
// classifier applied to the bag mean.
inline Var bag_predict_avg(Tape& tape, Var classifier_weight, Var classifier_bias, Var s) {
  return predict_distribution(tape, classifier_weight, classifier_bias, s);
}

// Attention mode: logit_j = w_j . s_j + bias_j with w_j the j-th classifier
// row, then softmax across relations.
inline Var bag_predict_att(Tape& tape, Var classifier_weight, Var classifier_bias,
                           Var per_relation_bag_embeddings) {
  auto logits = tape.add(tape.rowwise_dot(classifier_weight, per_relation_bag_embeddings),
                         classifier_bias);
  return tape.row_softmax(logits);
}

}  // namespace noisere
