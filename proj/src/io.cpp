#include "varmdp/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace varmdp {

using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) { throw std::runtime_error("cannot open " + path.string()); }
    json doc;
    in >> doc;
    return doc;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) { throw std::runtime_error("cannot write " + path.string()); }
    out << text;
    if (!out) { throw std::runtime_error("write failed for " + path.string()); }
}

json tensor_to_json(const Vec& flat, int S, int A) {
    json states = json::array();
    for (int s = 0; s < S; ++s) {
        json actions = json::array();
        for (int a = 0; a < A; ++a) {
            json row = json::array();
            const Real* base = flat.data() + (static_cast<size_t>(s) * A + a) * S;
            for (int i = 0; i < S; ++i) { row.push_back(base[i]); }
            actions.push_back(std::move(row));
        }
        states.push_back(std::move(actions));
    }
    return states;
}

Vec tensor_from_json(const json& doc, int S, int A, const char* what) {
    Vec flat(static_cast<size_t>(S) * A * S);
    if (static_cast<int>(doc.size()) != S) { throw std::runtime_error(std::string(what) + ": bad outer size"); }
    for (int s = 0; s < S; ++s) {
        const auto& actions = doc.at(s);
        if (static_cast<int>(actions.size()) != A) { throw std::runtime_error(std::string(what) + ": bad action size"); }
        for (int a = 0; a < A; ++a) {
            const auto& row = actions.at(a);
            if (static_cast<int>(row.size()) != S) { throw std::runtime_error(std::string(what) + ": bad row size"); }
            for (int i = 0; i < S; ++i) {
                flat[(static_cast<size_t>(s) * A + a) * S + i] = row.at(i).get<Real>();
            }
        }
    }
    return flat;
}

} // namespace

std::string format_double(Real value) {
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path) {
    json doc;
    doc["num_states"] = mdp.num_states;
    doc["num_actions"] = mdp.num_actions;
    doc["discount"] = mdp.discount;
    doc["initial_dist"] = mdp.initial_dist;
    doc["rewards"] = tensor_to_json(mdp.rewards, mdp.num_states, mdp.num_actions);
    write_text(path, doc.dump(1));
}

TabularMdp load_mdp(const std::filesystem::path& path) {
    const json doc = read_json(path);
    const int S = doc.at("num_states").get<int>();
    const int A = doc.at("num_actions").get<int>();
    return TabularMdp(S, A, tensor_from_json(doc.at("rewards"), S, A, "rewards"),
                      doc.at("discount").get<Real>(),
                      doc.at("initial_dist").get<Vec>());
}

void save_kernel(const TransitionModel& model, const std::filesystem::path& path) {
    json doc;
    doc["num_states"] = model.num_states;
    doc["num_actions"] = model.num_actions;
    doc["probs"] = tensor_to_json(model.probs, model.num_states, model.num_actions);
    write_text(path, doc.dump(1));
}

TransitionModel load_kernel(const std::filesystem::path& path) {
    const json doc = read_json(path);
    const int S = doc.at("num_states").get<int>();
    const int A = doc.at("num_actions").get<int>();
    return TransitionModel(S, A, tensor_from_json(doc.at("probs"), S, A, "probs"));
}

void save_posterior(const DirichletPosterior& posterior, const std::filesystem::path& path) {
    json doc;
    doc["num_states"] = posterior.num_states;
    doc["num_actions"] = posterior.num_actions;
    doc["concentration"] =
        tensor_to_json(posterior.concentration, posterior.num_states, posterior.num_actions);
    write_text(path, doc.dump(1));
}

DirichletPosterior load_posterior(const std::filesystem::path& path) {
    const json doc = read_json(path);
    DirichletPosterior posterior;
    posterior.num_states = doc.at("num_states").get<int>();
    posterior.num_actions = doc.at("num_actions").get<int>();
    posterior.concentration = tensor_from_json(doc.at("concentration"), posterior.num_states,
                                               posterior.num_actions, "concentration");
    posterior.validate();
    return posterior;
}

void save_dataset(const BatchDataset& dataset, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "s,a,r,s_next\n";
    for (const auto& t : dataset.tuples) {
        out << t.s << ',' << t.a << ',' << format_double(t.r) << ',' << t.s_next << '\n';
    }
    write_text(path, out.str());
}

BatchDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) { throw std::runtime_error("cannot open " + path.string()); }
    std::string line;
    if (!std::getline(in, line) || line != "s,a,r,s_next") {
        throw std::runtime_error("dataset " + path.string() + ": missing 's,a,r,s_next' header");
    }
    BatchDataset dataset;
    size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) { continue; }
        std::istringstream fields(line);
        BatchDataset::Tuple t;
        char c1 = 0;
        char c2 = 0;
        char c3 = 0;
        if (!(fields >> t.s >> c1 >> t.a >> c2 >> t.r >> c3 >> t.s_next) || c1 != ',' ||
            c2 != ',' || c3 != ',') {
            throw std::runtime_error("dataset " + path.string() + ": malformed line " +
                                     std::to_string(line_number));
        }
        dataset.tuples.push_back(t);
    }
    return dataset;
}

namespace {
constexpr char kEnsembleMagic[8] = {'V', 'M', 'D', 'P', 'E', 'N', 'S', '1'};

void put_u64(std::ostream& out, uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) { bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff); }
    out.write(bytes, 8);
}

uint64_t get_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) { v |= static_cast<uint64_t>(bytes[i]) << (8 * i); }
    return v;
}
} // namespace

void save_ensemble(const ModelEnsemble& ensemble, const std::filesystem::path& path) {
    if (ensemble.models.empty()) { throw InvalidInput("save_ensemble: empty ensemble"); }
    std::ofstream out(path, std::ios::binary);
    if (!out) { throw std::runtime_error("cannot write " + path.string()); }
    out.write(kEnsembleMagic, sizeof(kEnsembleMagic));
    put_u64(out, static_cast<uint64_t>(ensemble.num_states()));
    put_u64(out, static_cast<uint64_t>(ensemble.num_actions()));
    put_u64(out, static_cast<uint64_t>(ensemble.size()));
    put_u64(out, ensemble.seed);
    for (const auto& model : ensemble.models) {
        for (Real value : model.probs) {
            uint64_t bits;
            std::memcpy(&bits, &value, 8);
            put_u64(out, bits);
        }
    }
    if (!out) { throw std::runtime_error("write failed for " + path.string()); }
}

ModelEnsemble load_ensemble(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw std::runtime_error("cannot open " + path.string()); }
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kEnsembleMagic, 8) != 0) {
        throw std::runtime_error(path.string() + ": not an ensemble file");
    }
    const int S = static_cast<int>(get_u64(in));
    const int A = static_cast<int>(get_u64(in));
    const int M = static_cast<int>(get_u64(in));
    ModelEnsemble ensemble;
    ensemble.seed = get_u64(in);
    if (S <= 0 || A <= 0 || M <= 0) { throw std::runtime_error(path.string() + ": bad header"); }
    ensemble.models.assign(M, TransitionModel(S, A));
    for (auto& model : ensemble.models) {
        for (Real& value : model.probs) {
            const uint64_t bits = get_u64(in);
            std::memcpy(&value, &bits, 8);
        }
    }
    if (!in) { throw std::runtime_error(path.string() + ": truncated ensemble file"); }
    return ensemble;
}

} // namespace varmdp
