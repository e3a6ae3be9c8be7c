#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "gateway/gateway.hpp"

namespace mf::corpus {

struct TaskInstance {
    std::string id;
    std::string question;
    std::string gold_answer;
    std::map<std::string, std::string> metadata;  // e.g. "label" -> topic

    std::optional<std::string> label() const {
        auto it = metadata.find("label");
        if (it == metadata.end()) return std::nullopt;
        return it->second;
    }
};

struct EmbeddingVector {
    std::vector<double> components;
    size_t dimension() const { return components.size(); }
};

struct SubtaskCluster {
    int id = 0;
    std::vector<std::string> member_task_ids;
    std::vector<double> centroid;
    std::optional<std::string> label;
    std::optional<std::string> description;
};

// JSON-lines corpus: one object per line with id/question/answer and an
// optional metadata object.
std::vector<TaskInstance> load_corpus(const std::filesystem::path& path);
std::vector<TaskInstance> parse_corpus(const std::string& text);

struct SplitRatio {
    int validation = 1;
    int test = 4;
};

// Seed-deterministic disjoint exhaustive split; the rounding remainder
// goes to the test side.
std::pair<std::vector<TaskInstance>, std::vector<TaskInstance>> split_corpus(
    const std::vector<TaskInstance>& tasks, SplitRatio ratio, uint64_t seed);

class Embedder {
  public:
    virtual ~Embedder() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
    virtual size_t dimension() const = 0;
};

// Pure token feature-hashing embedder with TF weighting; the default.
std::shared_ptr<Embedder> make_hashing_embedder(size_t dimension = 256);

struct KmeansResult {
    std::vector<int> assignments;
    std::vector<std::vector<double>> centroids;
    double wcss = 0.0;
    std::vector<double> wcss_history;  // per Lloyd iteration, non-increasing
};

// Lloyd's algorithm with k-means++ seeding; empty clusters are reseeded
// to the farthest point.
KmeansResult kmeans_cluster(const std::vector<EmbeddingVector>& vectors, size_t k,
                            uint64_t seed, int max_iterations = 100);

struct ClusterOptions {
    size_t m = 1;
    bool label_mode = false;  // bypass clustering, group by metadata label
    uint64_t seed = 0;
};

std::vector<SubtaskCluster> cluster_tasks(const std::vector<TaskInstance>& tasks,
                                          const ClusterOptions& options, Embedder& embedder);

// Prompts the backend with sampled questions only; the returned
// description never sees gold answers.
std::string describe_subtask(const SubtaskCluster& cluster,
                             const std::vector<TaskInstance>& tasks, size_t sample_size,
                             gw::Gateway& gateway, const std::string& model, uint64_t seed);

// Builds the describe prompt without calling the backend; exposed so the
// answer-leak scan can inspect exactly what would be sent.
std::string describe_prompt(const SubtaskCluster& cluster,
                            const std::vector<TaskInstance>& tasks, size_t sample_size,
                            uint64_t seed);

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

json cluster_to_json(const SubtaskCluster& c);
SubtaskCluster cluster_from_json(const json& j);

}  // namespace mf::corpus
