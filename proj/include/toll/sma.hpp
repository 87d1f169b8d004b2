#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "toll/scene.hpp"
#include "toll/tape.hpp"

namespace toll::sma {

enum class ViewRole { kStudent, kTeacher };
enum class ViewSource { kOrigin, kAugmented };

struct ViewSpec {
    std::string id;
    ViewRole role = ViewRole::kStudent;
    ViewSource source = ViewSource::kOrigin;
    double point_mask_ratio = 0.0;
    double edge_mask_ratio = 0.0;
};

enum class Level { kObject, kEdge, kTriplet };
const char* level_name(Level l);

struct SmaConfig {
    static std::vector<ViewSpec> default_views();
    static std::vector<std::pair<std::string, std::string>> default_pairs();

    std::vector<ViewSpec> views = default_views();  // the five-view table
    std::vector<std::pair<std::string, std::string>> pairs = default_pairs();  // teacher -> student
    int queue_len = 256;
    int protos_obj = 64;
    int protos_edge = 32;
    int protos_trip = 48;
    double tau = 0.1;
    double sinkhorn_eps = 0.05;
    int sinkhorn_iters = 10;
    double lambda = 0.1;
    double ema_alpha = 0.996;
    double gen_point_mask = 0.8;  // point masking of the edge-guided generation view
    std::string distill_mode = "swav";  // "swav" or "mse"

    void validate() const;
};

// Prototype matrices and student predictor heads (the teacher carries no
// predictor). Prototype rows start unit-normalized.
void make_params(ParamStore& store, int d, const SmaConfig& cfg, Rng& rng);
void renormalize_prototypes(ParamStore& store);

// Deterministic per seed: optional spatial augmentation (scale jitter about
// the subgraph centroid, resampling with replacement, per-point jitter), then
// point masking per node (floor of 8 points) and uniform edge masking
// (connectivity not enforced). Descriptors and edge geometry are recomputed.
scene::SubgraphSample build_view(const scene::SubgraphSample& sample, const ViewSpec& spec, Rng& rng);
std::vector<scene::SubgraphSample> build_views(const scene::SubgraphSample& sample,
                                               const std::vector<ViewSpec>& table, uint64_t seed);

// xi <- alpha*xi + (1-alpha)*theta over the teacher's entries; every teacher
// entry must exist in the student with the same shape.
void ema_update(const ParamStore& student, ParamStore& teacher, double alpha);

// Log-space Sinkhorn toward uniform marginals; each round normalizes columns
// then rows, and the returned rows sum to 1 exactly. If col_dev is given it
// receives, per round, the max column-marginal deviation from uniform.
Tensor sinkhorn(const Tensor& scores, double eps, int iters, std::vector<double>* col_dev = nullptr);

class DistillBank {
public:
    DistillBank(int64_t capacity, int64_t d_obj, int64_t d_edge, int64_t d_trip);

    void push(Level level, const Tensor& features);
    Tensor view(Level level) const;  // len x D, insertion order
    int64_t size(Level level) const;
    int64_t capacity() const { return capacity_; }
    int64_t dim(Level level) const;
    bool full() const;

    // Checkpoint support.
    Tensor serialize(Level level) const { return view(level); }
    void restore(Level level, const Tensor& rows);

private:
    struct Fifo {
        std::deque<std::vector<double>> rows;
        int64_t dim = 0;
    };
    const Fifo& fifo(Level level) const;
    Fifo& fifo(Level level);

    int64_t capacity_;
    Fifo obj_, edge_, trip_;
};

// Teacher features per level for one sample (used for queue warm-up/push).
struct LevelFeatures {
    Tensor object;
    Tensor edge;
    Tensor triplet;
};

// Inference-only passes over the dataset until every queue is full; returns
// false (after a warning) when the stream yields nothing.
bool warmup_queues(DistillBank& bank, int num_samples,
                   const std::function<LevelFeatures(int)>& teacher_features);

// Prototype scores of the queue rows. Queue and prototypes change only at
// optimizer-step boundaries, so one computation serves a whole batch.
struct QueueScores {
    Tensor object, edge, triplet;
    const Tensor& at(Level level) const;
};
QueueScores queue_scores(const DistillBank& bank, const ParamStore& ps);

// Cross-entropy between Sinkhorn assignments of the teacher features
// (supported on [Z_t; queue], stop-gradient) and the student's prototype
// softmax. Loss covers only the first B rows. `cached_queue_scores` skips
// re-scoring the queue rows; the result is bit-identical either way.
Val swav_loss(Tape& t, Val z_student_pred, const Tensor& z_teacher, const DistillBank& bank,
              Level level, const ParamStore& ps, const SmaConfig& cfg,
              const Tensor* cached_queue_scores = nullptr);

// One view's features as the distillation sees them: students live on the
// tape, teachers are plain values.
struct ViewFeatures {
    bool is_teacher = false;
    Val h = -1;   // student node latents
    Val e = -1;   // student edge latents
    Tensor ht;    // teacher node latents
    Tensor et;    // teacher edge latents
    std::vector<std::pair<int, int>> edge_ids;  // per edge-row identity
    std::vector<std::pair<int, int>> node_span_of_edge;  // (src idx, dst idx) per edge row
};

// Sum of swav losses over the configured teacher->student pairs and the
// three levels; edge/triplet terms use edges surviving in both paired views.
Val distill_loss(Tape& t, const std::map<std::string, ViewFeatures>& views, const DistillBank& bank,
                 const ParamStore& ps, const SmaConfig& cfg, const QueueScores* qs = nullptr);

Val total_loss(Tape& t, Val gen, Val distill, double lambda);

}  // namespace toll::sma
