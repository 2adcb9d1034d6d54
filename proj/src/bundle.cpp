#include "aefi/bundle.hpp"

#include <fstream>
#include <sstream>

#include "aefi/error.hpp"

namespace aefi {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json matrix_json(const Matrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from(const json& doc) {
    const auto rows = doc.at("rows").get<std::size_t>();
    const auto cols = doc.at("cols").get<std::size_t>();
    const auto data = doc.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) throw ParseError("matrix data has the wrong length");
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
    return m;
}

// Trees are stored column-wise to keep bundles compact.
json tree_json(const CartTree& t) {
    json feature = json::array(), threshold = json::array(), left = json::array(),
         right = json::array(), wneg = json::array(), wpos = json::array();
    for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        wneg.push_back(n.weight_neg);
        wpos.push_back(n.weight_pos);
    }
    return json{{"n_features", t.n_features}, {"feature", feature},   {"threshold", threshold},
                {"left", left},               {"right", right},       {"weight_neg", wneg},
                {"weight_pos", wpos}};
}

CartTree tree_from(const json& doc) {
    CartTree t;
    t.n_features = doc.at("n_features").get<std::size_t>();
    const auto feature = doc.at("feature").get<std::vector<int>>();
    const auto threshold = doc.at("threshold").get<std::vector<double>>();
    const auto left = doc.at("left").get<std::vector<int>>();
    const auto right = doc.at("right").get<std::vector<int>>();
    const auto wneg = doc.at("weight_neg").get<std::vector<double>>();
    const auto wpos = doc.at("weight_pos").get<std::vector<double>>();
    const std::size_t n = feature.size();
    if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n ||
        wneg.size() != n || wpos.size() != n)
        throw ParseError("tree node columns have inconsistent lengths");
    t.nodes.resize(n);
    const int count = static_cast<int>(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& node = t.nodes[i];
        node = {feature[i], threshold[i], left[i], right[i], wneg[i], wpos[i]};
        if (!node.is_leaf()) {
            if (node.feature >= static_cast<int>(t.n_features) || node.left <= static_cast<int>(i) ||
                node.right <= static_cast<int>(i) || node.left >= count || node.right >= count)
                throw ParseError("tree node " + std::to_string(i) + " has invalid links");
        }
    }
    return t;
}

json boosted_json(const BoostedModel& m) {
    json stages = json::array();
    for (const auto& s : m.stages)
        stages.push_back(json{{"tree", tree_json(s.tree)}, {"weight", s.weight}, {"pseudo_loss", s.pseudo_loss}});
    return json{{"stages", stages}, {"rounds_completed", m.rounds_completed},
                {"stopped_early", m.stopped_early}};
}

BoostedModel boosted_from(const json& doc) {
    BoostedModel m;
    for (const json& s : doc.at("stages"))
        m.stages.push_back({tree_from(s.at("tree")), s.at("weight").get<double>(),
                            s.at("pseudo_loss").get<double>()});
    if (m.stages.empty()) throw ParseError("boosted model has no stages");
    m.rounds_completed = doc.at("rounds_completed").get<std::size_t>();
    m.stopped_early = doc.at("stopped_early").get<bool>();
    return m;
}

std::string kernel_name(KernelType t) {
    switch (t) {
        case KernelType::linear: return "linear";
        case KernelType::polynomial: return "polynomial";
        case KernelType::rbf: return "rbf";
    }
    return "?";
}

KernelType kernel_from(const std::string& s) {
    if (s == "linear") return KernelType::linear;
    if (s == "polynomial") return KernelType::polynomial;
    if (s == "rbf") return KernelType::rbf;
    throw ParseError("unknown kernel '" + s + "'");
}

json svc_json(const SvcModel& m) {
    const auto& c = m.config;
    return json{{"config",
                 {{"c", c.c},
                  {"kernel",
                   {{"type", kernel_name(c.kernel.type)},
                    {"degree", c.kernel.degree},
                    {"gamma", c.kernel.gamma},
                    {"coef0", c.kernel.coef0}}},
                  {"tol", c.tol},
                  {"max_iter", c.max_iter},
                  {"sv_threshold", c.sv_threshold},
                  {"seed", c.seed}}},
                {"support", matrix_json(m.support)},
                {"alpha", m.alpha},
                {"dual_coef", m.dual_coef},
                {"support_ids", m.support_ids},
                {"bias", m.bias},
                {"converged", m.converged},
                {"iterations", m.iterations}};
}

SvcModel svc_from(const json& doc) {
    SvcModel m;
    const json& c = doc.at("config");
    m.config.c = c.at("c").get<double>();
    const json& k = c.at("kernel");
    m.config.kernel.type = kernel_from(k.at("type").get<std::string>());
    m.config.kernel.degree = k.at("degree").get<int>();
    m.config.kernel.gamma = k.at("gamma").get<double>();
    m.config.kernel.coef0 = k.at("coef0").get<double>();
    m.config.tol = c.at("tol").get<double>();
    m.config.max_iter = c.at("max_iter").get<std::size_t>();
    m.config.sv_threshold = c.at("sv_threshold").get<double>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.support = matrix_from(doc.at("support"));
    m.alpha = doc.at("alpha").get<std::vector<double>>();
    m.dual_coef = doc.at("dual_coef").get<std::vector<double>>();
    m.support_ids = doc.at("support_ids").get<std::vector<std::int64_t>>();
    m.bias = doc.at("bias").get<double>();
    m.converged = doc.at("converged").get<bool>();
    m.iterations = doc.at("iterations").get<std::size_t>();
    if (m.dual_coef.size() != m.support.rows() || m.alpha.size() != m.support.rows())
        throw ParseError("support rows and coefficients disagree");
    return m;
}

json model_body(const ModelVariant& v) {
    return std::visit(
        overloaded{
            [](const CartTree& m) { return tree_json(m); },
            [](const ForestModel& m) {
                json trees = json::array();
                for (const auto& t : m.trees) trees.push_back(tree_json(t));
                return json{{"trees", trees}};
            },
            [](const BoostedModel& m) { return boosted_json(m); },
            [](const EasyModel& m) {
                json members = json::array();
                for (const auto& b : m.members) members.push_back(boosted_json(b));
                return json{{"members", members}};
            },
            [](const SvcModel& m) { return svc_json(m); },
            [](const LogRegModel& m) {
                return json{{"weights", m.weights},
                            {"bias", m.bias},
                            {"config",
                             {{"learning_rate", m.config.learning_rate},
                              {"iterations", m.config.iterations},
                              {"l2", m.config.l2}}}};
            },
            [](const KnnModel& m) {
                return json{{"x", matrix_json(m.x)}, {"y", m.y}, {"ids", m.ids}, {"k", m.k}};
            },
            [](const ExternalModel& m) -> json {
                throw ValidationError("external model '" + m.name + "' cannot be serialized");
            },
        },
        v);
}

ModelVariant model_body_from(const std::string& family, const json& doc) {
    if (family == "cart") return tree_from(doc);
    if (family == "forest") {
        ForestModel m;
        for (const json& t : doc.at("trees")) m.trees.push_back(tree_from(t));
        if (m.trees.empty()) throw ParseError("forest has no trees");
        return m;
    }
    if (family == "boosted") return boosted_from(doc);
    if (family == "easy") {
        EasyModel m;
        for (const json& b : doc.at("members")) m.members.push_back(boosted_from(b));
        if (m.members.empty()) throw ParseError("ensemble has no members");
        return m;
    }
    if (family == "svc") return svc_from(doc);
    if (family == "logistic") {
        LogRegModel m;
        m.weights = doc.at("weights").get<std::vector<double>>();
        m.bias = doc.at("bias").get<double>();
        const json& c = doc.at("config");
        m.config.learning_rate = c.at("learning_rate").get<double>();
        m.config.iterations = c.at("iterations").get<std::size_t>();
        m.config.l2 = c.at("l2").get<double>();
        return m;
    }
    if (family == "knn") {
        KnnModel m;
        m.x = matrix_from(doc.at("x"));
        m.y = doc.at("y").get<std::vector<int>>();
        m.ids = doc.at("ids").get<std::vector<std::int64_t>>();
        m.k = doc.at("k").get<std::size_t>();
        if (m.y.size() != m.x.rows() || m.ids.size() != m.x.rows() || m.k == 0 || m.k > m.y.size())
            throw ParseError("knn model is inconsistent");
        return m;
    }
    throw ParseError("unknown model family '" + family + "'");
}

json seed_report_json(const SeedReport& r) {
    return json{{"support_ids", r.support_ids}, {"beta", r.beta}, {"support_count", r.support_count}};
}

}  // namespace

json BundleMetadata::to_json() const {
    return json{{"algorithm", algorithm},
                {"params", aefi::to_json(params)},
                {"trained_at", trained_at ? json(*trained_at) : json(nullptr)},
                {"holdout_auc", holdout_auc ? json(*holdout_auc) : json(nullptr)},
                {"seed", seed},
                {"threshold", threshold}};
}

BundleMetadata BundleMetadata::from_json(const json& doc) {
    BundleMetadata m;
    m.algorithm = doc.at("algorithm").get<std::string>();
    m.params = params_from_json(doc.at("params"));
    if (!doc.at("trained_at").is_null()) m.trained_at = doc.at("trained_at").get<std::string>();
    if (!doc.at("holdout_auc").is_null()) m.holdout_auc = doc.at("holdout_auc").get<double>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.threshold = doc.at("threshold").get<double>();
    if (!(m.threshold >= 0.0 && m.threshold <= 1.0))
        throw ParseError("bundle threshold must lie in [0, 1]");
    return m;
}

double ModelBundle::score(const RawRecord& record) const {
    const auto row = encoder.encode(record);
    return predict_score(model, row);
}

json model_to_json(const TrainedModel& model) {
    json doc{{"family", family_name(model.model)},
             {"algorithm", model.algorithm},
             {"params", to_json(model.params)},
             {"n_features", model.n_features},
             {"body", model_body(model.model)}};
    if (model.seed_report) doc["seed_report"] = seed_report_json(*model.seed_report);
    return doc;
}

TrainedModel model_from_json(const json& doc) {
    TrainedModel m;
    m.algorithm = doc.at("algorithm").get<std::string>();
    m.params = params_from_json(doc.at("params"));
    m.n_features = doc.at("n_features").get<std::size_t>();
    m.model = model_body_from(doc.at("family").get<std::string>(), doc.at("body"));
    if (doc.contains("seed_report")) {
        const json& r = doc.at("seed_report");
        m.seed_report = SeedReport{r.at("support_ids").get<std::vector<std::int64_t>>(),
                                   r.at("beta").get<double>(), r.at("support_count").get<std::size_t>()};
    }
    return m;
}

std::string serialize_model(const ModelBundle& bundle) {
    json encoder = bundle.encoder.to_json();
    json schema = encoder.at("schema");
    encoder.erase("schema");
    json doc{{"format_version", bundle.format_version},
             {"schema", schema},
             {"encoder", encoder},
             {"model", model_to_json(bundle.model)},
             {"metadata", bundle.metadata.to_json()}};
    return doc.dump() + "\n";
}

ModelBundle deserialize_model(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("bundle is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("format_version") ||
        !doc.at("format_version").is_number_integer())
        throw ParseError("bundle has no integer format_version");
    const int version = doc.at("format_version").get<int>();
    if (version != kBundleFormatVersion)
        throw VersionError("unsupported bundle format_version " + std::to_string(version) +
                           " (this build reads " + std::to_string(kBundleFormatVersion) + ")");
    ModelBundle b;
    try {
        json encoder = doc.at("encoder");
        encoder["schema"] = doc.at("schema");
        b.encoder = Encoder::from_json(encoder);
        b.model = model_from_json(doc.at("model"));
        b.metadata = BundleMetadata::from_json(doc.at("metadata"));
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed bundle: ") + e.what());
    }
    if (b.model.n_features != b.encoder.dim())
        throw ParseError("bundle model expects " + std::to_string(b.model.n_features) +
                         " features but the encoder produces " + std::to_string(b.encoder.dim()));
    return b;
}

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle) {
    const std::string text = serialize_model(bundle);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot write bundle " + path.string());
    out << text;
    out.flush();
    if (!out) throw StorageError("failed writing bundle " + path.string());
}

ModelBundle load_bundle(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot read bundle " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

}  // namespace aefi
