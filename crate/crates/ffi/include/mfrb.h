#ifndef MFRB_H
#define MFRB_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum MfrbStatus {
  MFRB_STATUS_OK = 0,
  // Null pointer, bad length or out-of-range argument.
  MFRB_STATUS_INVALID_ARGUMENT = 1,
  // Malformed edge list.
  MFRB_STATUS_PARSE_ERROR = 2,
  // Invalid model, budget or parameters.
  MFRB_STATUS_CONFIG_ERROR = 3,
  MFRB_STATUS_IO_ERROR = 4,
  // Instance too large for exact evaluation.
  MFRB_STATUS_TOO_LARGE = 5,
  // A Rust panic was caught at the boundary.
  MFRB_STATUS_INTERNAL = 6,
} MfrbStatus;

typedef struct MfrbGraph MfrbGraph;

typedef struct MfrbModel MfrbModel;

typedef struct MfrbSeeds MfrbSeeds;

typedef struct MfrbSolution MfrbSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after success.
// The pointer stays valid until the next call on this thread.
const char *mfrb_last_error(void);

// Parse an edge list held in `text` (NUL-terminated).
// `text` must be a valid C string and `out_graph` a valid pointer.
enum MfrbStatus mfrb_graph_parse(const char *text, struct MfrbGraph **out_graph);

// Load an edge-list file, optionally adding every reverse edge.
// `path` must be a valid C string and `out_graph` a valid pointer.
enum MfrbStatus mfrb_graph_load(const char *path, bool symmetrize, struct MfrbGraph **out_graph);

// Build a graph on `n` nodes from `m` edges `src[i] -> dst[i]`.
// `src` and `dst` must point to `m` elements each.
enum MfrbStatus mfrb_graph_from_edges(size_t n,
                                      const uint32_t *src,
                                      const uint32_t *dst,
                                      size_t m,
                                      struct MfrbGraph **out_graph);

// `graph` must come from this library and not be used afterwards.
void mfrb_graph_free(struct MfrbGraph *graph);

// Number of nodes; 0 for a null handle.
// `graph` must be null or a live handle.
size_t mfrb_graph_node_count(const struct MfrbGraph *graph);

// Number of edges after self-loop and duplicate removal.
// `graph` must be null or a live handle.
size_t mfrb_graph_edge_count(const struct MfrbGraph *graph);

// Input label of `node`; `UINT64_MAX` when out of range.
// `graph` must be null or a live handle.
uint64_t mfrb_graph_label(const struct MfrbGraph *graph, uint32_t node);

// Feature model with `r` layers and constant per-layer probabilities.
// `weights` and `probs` must point to `r` elements each.
enum MfrbStatus mfrb_model_new_constant(const double *weights,
                                        const double *probs,
                                        size_t r,
                                        struct MfrbModel **out_model);

// Feature model with `r` layers under the weighted-cascade scheme.
// `weights` must point to `r` elements.
enum MfrbStatus mfrb_model_new_weighted_cascade(const double *weights,
                                                size_t r,
                                                struct MfrbModel **out_model);

// `model` must come from this library and not be used afterwards.
void mfrb_model_free(struct MfrbModel *model);

// Write the `size` highest out-degree nodes (ties to the lowest id) to
// `out_nodes`, which must hold `size` elements.
// `graph` must be live and `out_nodes` writable for `size` elements.
enum MfrbStatus mfrb_select_rumor_seeds(const struct MfrbGraph *graph,
                                        size_t size,
                                        uint32_t *out_nodes);

// Rumor placement where every rumor user accepts the rumor in each of the
// model's layers independently with probability `accept`, drawn from `seed`.
// Handles must be live; `rumor` must point to `count` elements.
enum MfrbStatus mfrb_seeds_new(const struct MfrbGraph *graph,
                               const struct MfrbModel *model,
                               const uint32_t *rumor,
                               size_t count,
                               double accept,
                               uint64_t seed,
                               struct MfrbSeeds **out_seeds);

// `seeds` must come from this library and not be used afterwards.
void mfrb_seeds_free(struct MfrbSeeds *seeds);

// Select `k` protector seeds with Revised-IMM.
// Handles must be live and `out_solution` valid.
enum MfrbStatus mfrb_solve(const struct MfrbGraph *graph,
                           const struct MfrbModel *model,
                           const struct MfrbSeeds *seeds,
                           size_t k,
                           double eps,
                           double ell,
                           uint64_t seed,
                           struct MfrbSolution **out_solution);

// Number of selected seeds.
// `solution` must be null or a live handle.
size_t mfrb_solution_seed_count(const struct MfrbSolution *solution);

// Copy up to `cap` seeds in pick order; returns the number copied.
// `out_nodes` must be writable for `cap` elements.
size_t mfrb_solution_seeds(const struct MfrbSolution *solution, uint32_t *out_nodes, size_t cap);

// `n * r * W`, the sampled estimate of the objective; NaN for null.
// `solution` must be null or a live handle.
double mfrb_solution_estimate(const struct MfrbSolution *solution);

// Size of the final sample pool.
// `solution` must be null or a live handle.
size_t mfrb_solution_pool_size(const struct MfrbSolution *solution);

// Lower bound on the optimum used to size the final pool.
// `solution` must be null or a live handle.
double mfrb_solution_lower_bound(const struct MfrbSolution *solution);

// `solution` must come from this library and not be used afterwards.
void mfrb_solution_free(struct MfrbSolution *solution);

// Monte-Carlo objective of the protector set `positive` over `runs`
// simulations keyed by `seed`. `std_err` may be null.
// Handles must be live, `positive` must point to `count` elements and
// `mean` must be writable.
enum MfrbStatus mfrb_evaluate_mc(const struct MfrbGraph *graph,
                                 const struct MfrbModel *model,
                                 const struct MfrbSeeds *seeds,
                                 const uint32_t *positive,
                                 size_t count,
                                 size_t runs,
                                 uint64_t seed,
                                 double *mean,
                                 double *std_err);

// Exact objective by enumeration; fails with `TooLarge` beyond 22 random
// edge-layer pairs.
// As [`mfrb_evaluate_mc`].
enum MfrbStatus mfrb_evaluate_exact(const struct MfrbGraph *graph,
                                    const struct MfrbModel *model,
                                    const struct MfrbSeeds *seeds,
                                    const uint32_t *positive,
                                    size_t count,
                                    double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFRB_H */
