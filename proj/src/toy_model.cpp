#include "iwsi/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "iwsi/errors.hpp"

namespace iwsi {

namespace {

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end,
                        TokenizerMode mode) {
    std::string key;
    for (std::size_t i = begin; i < end; ++i) {
        if (mode == TokenizerMode::word && i > begin) key += ' ';
        key += tokens[i];
    }
    return key;
}

} // namespace

ToyLanguageModel::ToyLanguageModel(int order, double alpha, TokenizerMode mode)
    : order_(order), alpha_(alpha), mode_(mode) {
    if (order < 1) throw Error(ExitCode::precondition, "n-gram order must be >= 1");
    if (!(alpha > 0.0)) throw Error(ExitCode::precondition, "smoothing alpha must be > 0");
}

ToyLanguageModel ToyLanguageModel::from_counts(int order, double alpha,
                                               std::set<std::string> vocabulary, Counts counts,
                                               TokenizerMode mode) {
    ToyLanguageModel m(order, alpha, mode);
    m.vocab_ = std::move(vocabulary);
    m.counts_ = std::move(counts);
    for (const auto& [ctx, table] : m.counts_)
        for (const auto& [tok, c] : table)
            if (c < 0.0) throw Error(ExitCode::precondition, "negative count for token " + tok);
    return m;
}

std::string ToyLanguageModel::context_key(const std::vector<std::string>& tokens,
                                          std::size_t end) const {
    std::size_t ctx = static_cast<std::size_t>(order_ - 1);
    std::size_t begin = end >= ctx ? end - ctx : 0;
    return join_tokens(tokens, begin, end, mode_);
}

double ToyLanguageModel::prob(const std::vector<std::string>& context,
                              const std::string& token) const {
    std::size_t ctx = static_cast<std::size_t>(order_ - 1);
    std::size_t begin = context.size() >= ctx ? context.size() - ctx : 0;
    return prob_for_key(join_tokens(context, begin, context.size(), mode_), token);
}

double ToyLanguageModel::prob_for_key(const std::string& key, const std::string& token) const {
    if (vocab_.empty()) throw Error(ExitCode::precondition, "model has an empty vocabulary");
    double count = 0.0;
    double total = 0.0;
    auto it = counts_.find(key);
    if (it != counts_.end()) {
        for (const auto& [tok, c] : it->second) total += c;
        auto jt = it->second.find(token);
        if (jt != it->second.end()) count = jt->second;
    }
    return (count + alpha_) / (total + alpha_ * static_cast<double>(vocab_.size()));
}

double ToyLanguageModel::sequence_nll(const std::string& context_text,
                                      const std::string& target_text) const {
    std::vector<std::string> stream(static_cast<std::size_t>(order_ - 1), bos_token());
    auto ctx_tokens = tokenize(context_text, mode_);
    stream.insert(stream.end(), ctx_tokens.begin(), ctx_tokens.end());
    std::size_t target_begin = stream.size();
    auto tgt_tokens = tokenize(target_text, mode_);
    if (tgt_tokens.empty()) throw TokenizationError("target tokenizes to nothing");
    stream.insert(stream.end(), tgt_tokens.begin(), tgt_tokens.end());

    double nll = 0.0;
    for (std::size_t pos = target_begin; pos < stream.size(); ++pos)
        nll -= std::log(prob_for_key(context_key(stream, pos), stream[pos]));
    return nll / static_cast<double>(tgt_tokens.size());
}

std::string ToyLanguageModel::complete(const std::string& prompt, double temperature, Rng& rng,
                                       int max_tokens) const {
    if (temperature < 0.0) throw Error(ExitCode::precondition, "temperature must be >= 0");

    std::vector<std::string> stream(static_cast<std::size_t>(order_ - 1), bos_token());
    auto prompt_tokens = tokenize(prompt, mode_);
    stream.insert(stream.end(), prompt_tokens.begin(), prompt_tokens.end());

    const std::string start_key =
        join_tokens(std::vector<std::string>(static_cast<std::size_t>(order_ - 1), bos_token()), 0,
                    static_cast<std::size_t>(order_ - 1), mode_);

    std::vector<std::string> out;
    for (int step = 0; step < max_tokens; ++step) {
        std::string key = context_key(stream, stream.size());
        const std::map<std::string, double>* table = nullptr;
        auto it = counts_.find(key);
        if (it != counts_.end() && !it->second.empty()) {
            table = &it->second;
        } else {
            auto st = counts_.find(start_key);
            if (st != counts_.end() && !st->second.empty()) table = &st->second;
        }

        bool first = out.empty();
        std::vector<std::string> tokens;
        std::vector<double> weights;
        if (table != nullptr) {
            for (const auto& [tok, c] : *table) {
                if (c <= 0.0) continue;
                if (first && tok == eos_token()) continue;
                tokens.push_back(tok);
                weights.push_back(c);
            }
        } else {
            for (const auto& tok : vocab_) {
                if (first && tok == eos_token()) continue;
                tokens.push_back(tok);
                weights.push_back(1.0);
            }
        }
        if (tokens.empty())
            throw EmptyCompletionError("model cannot produce a non-empty completion");

        std::string next;
        if (temperature == 0.0) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < tokens.size(); ++i)
                if (weights[i] > weights[best]) best = i;
            next = tokens[best];
        } else {
            // normalize by the max count before exponentiating so small
            // temperatures underflow toward greedy instead of overflowing
            double max_w = *std::max_element(weights.begin(), weights.end());
            double total = 0.0;
            for (double& w : weights) {
                w = std::pow(w / max_w, 1.0 / temperature);
                total += w;
            }
            next = tokens[rng.pick_weighted(weights, total)];
        }
        if (next == eos_token()) break;
        out.push_back(next);
        stream.push_back(next);
    }
    return detokenize(out, mode_);
}

void ToyLanguageModel::accumulate(const std::string& text, double weight) {
    if (weight < 0.0 || !std::isfinite(weight))
        throw Error(ExitCode::precondition, "sample weight must be finite and >= 0");
    if (weight == 0.0) return;

    std::vector<std::string> stream(static_cast<std::size_t>(order_ - 1), bos_token());
    auto tokens = tokenize(text, mode_);
    stream.insert(stream.end(), tokens.begin(), tokens.end());
    stream.push_back(eos_token());

    std::size_t first_target = static_cast<std::size_t>(order_ - 1);
    for (std::size_t pos = first_target; pos < stream.size(); ++pos) {
        counts_[context_key(stream, pos)][stream[pos]] += weight;
        vocab_.insert(stream[pos]);
    }
}

ordered_json ToyLanguageModel::to_json() const {
    ordered_json jcounts = ordered_json::object();
    for (const auto& [ctx, table] : counts_) {
        ordered_json row = ordered_json::object();
        for (const auto& [tok, c] : table) row[tok] = c;
        jcounts[ctx] = std::move(row);
    }
    return ordered_json{{"order", order_},
                        {"alpha", alpha_},
                        {"tokenizer", to_string(mode_)},
                        {"vocabulary", std::vector<std::string>(vocab_.begin(), vocab_.end())},
                        {"counts", std::move(jcounts)}};
}

ToyLanguageModel ToyLanguageModel::from_json(const ordered_json& j) {
    if (!j.is_object() || !j.contains("order") || !j.contains("alpha") || !j.contains("counts"))
        throw SchemaError("not a toy model file");
    int order = j.at("order").get<int>();
    double alpha = j.at("alpha").get<double>();
    TokenizerMode mode = tokenizer_mode_from_string(j.value("tokenizer", std::string("word")));
    std::set<std::string> vocab;
    for (const auto& tok : j.at("vocabulary")) vocab.insert(tok.get<std::string>());
    Counts counts;
    for (const auto& [ctx, table] : j.at("counts").items())
        for (const auto& [tok, c] : table.items()) counts[ctx][tok] = c.get<double>();
    return from_counts(order, alpha, std::move(vocab), std::move(counts), mode);
}

void ToyLanguageModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << to_json().dump(2) << '\n';
    if (!out) throw IoError("write failure on " + path.string());
}

ToyLanguageModel ToyLanguageModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    ordered_json j = ordered_json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw SchemaError("invalid JSON in " + path.string());
    return from_json(j);
}

ToyLanguageModel train_update(const ToyLanguageModel& model,
                              const std::vector<std::pair<std::string, double>>& samples,
                              double mix) {
    if (!(mix > 0.0) || mix > 1.0)
        throw Error(ExitCode::precondition, "mix must lie in (0, 1]");
    ToyLanguageModel updated = model;
    for (const auto& [text, weight] : samples) updated.accumulate(text, weight * mix);
    return updated;
}

} // namespace iwsi
