#include "corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace mf::corpus {

std::vector<TaskInstance> parse_corpus(const std::string& text) {
    std::vector<TaskInstance> tasks;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("id") ||
            !j.contains("question") || !j.contains("answer")) {
            fail(ErrorKind::FormatError, "corpus line " + std::to_string(line_no) +
                                             ": expected object with id/question/answer");
        }
        TaskInstance t;
        t.id = j.at("id").get<std::string>();
        t.question = j.at("question").get<std::string>();
        t.gold_answer = j.at("answer").get<std::string>();
        if (t.question.empty()) {
            fail(ErrorKind::FormatError,
                 "corpus line " + std::to_string(line_no) + ": empty question");
        }
        if (j.contains("metadata")) {
            for (const auto& [k, v] : j.at("metadata").items()) {
                t.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
            }
        }
        if (!seen.insert(t.id).second) {
            fail(ErrorKind::DuplicateId, "duplicate task id '" + t.id + "' at line " +
                                             std::to_string(line_no));
        }
        tasks.push_back(std::move(t));
    }
    return tasks;
}

std::vector<TaskInstance> load_corpus(const std::filesystem::path& path) {
    return parse_corpus(read_file(path));
}

std::pair<std::vector<TaskInstance>, std::vector<TaskInstance>> split_corpus(
    const std::vector<TaskInstance>& tasks, SplitRatio ratio, uint64_t seed) {
    if (ratio.validation < 1 || ratio.test < 1)
        fail(ErrorKind::ConfigError, "split ratio parts must be positive");
    size_t total = static_cast<size_t>(ratio.validation + ratio.test);
    if (tasks.size() < total)
        fail(ErrorKind::TooFewTasks, "need at least " + std::to_string(total) + " tasks, got " +
                                         std::to_string(tasks.size()));
    // exact proportional split, remainder to the test side
    size_t n_val = tasks.size() * static_cast<size_t>(ratio.validation) / total;
    if (n_val == 0) n_val = 1;

    std::vector<size_t> order(tasks.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order);

    std::vector<TaskInstance> validation, test;
    for (size_t i = 0; i < order.size(); ++i) {
        (i < n_val ? validation : test).push_back(tasks[order[i]]);
    }
    return {std::move(validation), std::move(test)};
}

// ---------------------------------------------------------------- embedding

namespace {

class HashingEmbedder : public Embedder {
  public:
    explicit HashingEmbedder(size_t dim) : dim_(dim) {}

    size_t dimension() const override { return dim_; }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& text : texts) {
            EmbeddingVector v;
            v.components.assign(dim_, 0.0);
            for (const auto& token : tokenize(text)) {
                v.components[fnv1a64(token) % dim_] += 1.0;  // TF weighting
            }
            out.push_back(std::move(v));
        }
        return out;
    }

  private:
    static std::vector<std::string> tokenize(const std::string& text) {
        std::vector<std::string> tokens;
        std::string cur;
        for (unsigned char c : text) {
            if (std::isalnum(c)) {
                cur += static_cast<char>(std::tolower(c));
            } else if (!cur.empty()) {
                tokens.push_back(cur);
                cur.clear();
            }
        }
        if (!cur.empty()) tokens.push_back(cur);
        return tokens;
    }

    size_t dim_;
};

}  // namespace

std::shared_ptr<Embedder> make_hashing_embedder(size_t dimension) {
    return std::make_shared<HashingEmbedder>(dimension);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension())
        fail(ErrorKind::EmbedBackendError, "dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.components.size(); ++i) {
        dot += a.components[i] * b.components[i];
        na += a.components[i] * a.components[i];
        nb += b.components[i] * b.components[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / std::sqrt(na * nb);
}

// ------------------------------------------------------------------ kmeans

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

KmeansResult kmeans_once(const std::vector<EmbeddingVector>& vectors, size_t k,
                         uint64_t seed, int max_iterations) {
    size_t n = vectors.size();
    size_t dim = vectors.front().dimension();

    Rng rng(derive_seed(seed, "kmeans"));
    std::vector<std::vector<double>> centroids;

    // k-means++ seeding
    centroids.push_back(vectors[rng.below(n)].components);
    std::vector<double> d2(n);
    while (centroids.size() < k) {
        double total = 0;
        for (size_t i = 0; i < n; ++i) {
            double best = sq_dist(vectors[i].components, centroids[0]);
            for (size_t c = 1; c < centroids.size(); ++c) {
                best = std::min(best, sq_dist(vectors[i].components, centroids[c]));
            }
            d2[i] = best;
            total += best;
        }
        size_t pick;
        if (total <= 0) {
            pick = rng.below(n);
        } else {
            double r = rng.real() * total;
            pick = n - 1;
            double acc = 0;
            for (size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(vectors[pick].components);
    }

    KmeansResult result;
    result.assignments.assign(n, -1);

    for (int iter = 0; iter < max_iterations; ++iter) {
        bool changed = false;
        double wcss = 0;
        for (size_t i = 0; i < n; ++i) {
            int best_c = 0;
            double best_d = sq_dist(vectors[i].components, centroids[0]);
            for (size_t c = 1; c < k; ++c) {
                double d = sq_dist(vectors[i].components, centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best_c = static_cast<int>(c);
                }
            }
            if (result.assignments[i] != best_c) {
                result.assignments[i] = best_c;
                changed = true;
            }
            wcss += best_d;
        }
        result.wcss = wcss;
        result.wcss_history.push_back(wcss);
        if (!changed && iter > 0) break;

        // recompute means; reseed empty clusters to the farthest point
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<size_t> counts(k, 0);
        for (size_t i = 0; i < n; ++i) {
            int c = result.assignments[i];
            for (size_t d = 0; d < dim; ++d) sums[c][d] += vectors[i].components[d];
            ++counts[c];
        }
        for (size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                size_t far = 0;
                double far_d = -1;
                for (size_t i = 0; i < n; ++i) {
                    double d = sq_dist(vectors[i].components,
                                       centroids[result.assignments[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                centroids[c] = vectors[far].components;
            } else {
                for (size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] / counts[c];
            }
        }
    }
    result.centroids = std::move(centroids);
    return result;
}

}  // namespace

KmeansResult kmeans_cluster(const std::vector<EmbeddingVector>& vectors, size_t k,
                            uint64_t seed, int max_iterations) {
    size_t n = vectors.size();
    if (k < 1 || k > n) fail(ErrorKind::BadK, "k must be in [1, n]");
    size_t dim = vectors.front().dimension();
    for (const auto& v : vectors) {
        if (v.dimension() != dim) fail(ErrorKind::BadK, "inconsistent vector dimensions");
        for (double c : v.components) {
            if (!std::isfinite(c)) fail(ErrorKind::BadK, "non-finite component");
        }
    }

    // Lloyd's converges to a local optimum that depends on the seeding, so
    // run several deterministic restarts and keep the lowest final WCSS
    const int kRestarts = 10;
    std::optional<KmeansResult> best;
    for (int r = 0; r < kRestarts; ++r) {
        KmeansResult candidate =
            kmeans_once(vectors, k, derive_seed(seed, "restart/" + std::to_string(r)),
                        max_iterations);
        if (!best || candidate.wcss < best->wcss) best = std::move(candidate);
    }
    return *best;
}

// ---------------------------------------------------------------- clusters

std::vector<SubtaskCluster> cluster_tasks(const std::vector<TaskInstance>& tasks,
                                          const ClusterOptions& options, Embedder& embedder) {
    if (tasks.empty()) fail(ErrorKind::EmptySubtask, "no tasks to cluster");
    std::vector<SubtaskCluster> clusters;

    if (options.label_mode) {
        std::map<std::string, std::vector<std::string>> groups;
        for (const auto& t : tasks) {
            auto label = t.label();
            if (!label)
                fail(ErrorKind::ConfigError, "label mode requires every task to carry a label");
            groups[*label].push_back(t.id);
        }
        int id = 0;
        for (auto& [label, members] : groups) {
            SubtaskCluster c;
            c.id = id++;
            c.label = label;
            c.member_task_ids = std::move(members);
            clusters.push_back(std::move(c));
        }
        return clusters;
    }

    size_t m = std::min(options.m, tasks.size());
    if (m < 1) fail(ErrorKind::BadK, "cluster count must be >= 1");
    std::vector<std::string> questions;
    questions.reserve(tasks.size());
    for (const auto& t : tasks) questions.push_back(t.question);
    auto vectors = embedder.embed(questions);
    auto km = kmeans_cluster(vectors, m, options.seed);

    clusters.resize(m);
    for (size_t c = 0; c < m; ++c) {
        clusters[c].id = static_cast<int>(c);
        clusters[c].centroid = km.centroids[c];
    }
    for (size_t i = 0; i < tasks.size(); ++i) {
        clusters[static_cast<size_t>(km.assignments[i])].member_task_ids.push_back(tasks[i].id);
    }
    // drop empty clusters so the partition invariant (non-empty members) holds
    clusters.erase(std::remove_if(clusters.begin(), clusters.end(),
                                  [](const SubtaskCluster& c) {
                                      return c.member_task_ids.empty();
                                  }),
                   clusters.end());
    for (size_t c = 0; c < clusters.size(); ++c) clusters[c].id = static_cast<int>(c);
    return clusters;
}

// ---------------------------------------------------------------- describe

std::string describe_prompt(const SubtaskCluster& cluster,
                            const std::vector<TaskInstance>& tasks, size_t sample_size,
                            uint64_t seed) {
    if (cluster.member_task_ids.empty()) fail(ErrorKind::EmptySubtask, "empty cluster");
    if (sample_size < 1) fail(ErrorKind::ConfigError, "sample_size must be >= 1");

    std::map<std::string, const TaskInstance*> by_id;
    for (const auto& t : tasks) by_id[t.id] = &t;

    std::vector<std::string> ids = cluster.member_task_ids;
    Rng rng(derive_seed(seed, "describe/" + std::to_string(cluster.id)));
    rng.shuffle(ids);
    size_t take = std::min(sample_size, ids.size());

    // the prompt carries sampled question texts only, never answers
    std::string prompt =
        "Below are sample questions drawn from one group of tasks. Write a short "
        "high-level description of what this group of problems is about and what "
        "skills solving them requires. Base your description solely on the "
        "questions.\n";
    for (size_t i = 0; i < take; ++i) {
        auto it = by_id.find(ids[i]);
        if (it == by_id.end())
            fail(ErrorKind::CorruptRun, "cluster references unknown task '" + ids[i] + "'");
        prompt += "\nQuestion " + std::to_string(i + 1) + ": " + it->second->question;
    }
    prompt += "\n\nRespond with a JSON object with exactly these keys: \"description\".";
    return prompt;
}

std::string describe_subtask(const SubtaskCluster& cluster,
                             const std::vector<TaskInstance>& tasks, size_t sample_size,
                             gw::Gateway& gateway, const std::string& model, uint64_t seed) {
    gw::ChatRequest req;
    req.model = model;
    req.temperature = 0.5;
    req.seed = 0;
    req.messages = {{"system", "You summarize problem collections."},
                    {"user", describe_prompt(cluster, tasks, sample_size, seed)}};
    auto fields = gw::complete_structured(gateway, req, {"description"});
    return fields.at("description");
}

// -------------------------------------------------------------------- json

json cluster_to_json(const SubtaskCluster& c) {
    json j{{"id", c.id}, {"members", c.member_task_ids}};
    if (!c.centroid.empty()) j["centroid"] = c.centroid;
    if (c.label) j["label"] = *c.label;
    if (c.description) j["description"] = *c.description;
    return j;
}

SubtaskCluster cluster_from_json(const json& j) {
    SubtaskCluster c;
    c.id = j.at("id").get<int>();
    c.member_task_ids = j.at("members").get<std::vector<std::string>>();
    if (j.contains("centroid")) c.centroid = j.at("centroid").get<std::vector<double>>();
    if (j.contains("label")) c.label = j.at("label").get<std::string>();
    if (j.contains("description")) c.description = j.at("description").get<std::string>();
    return c;
}

}  // namespace mf::corpus
