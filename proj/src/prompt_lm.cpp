#include "maker/prompt_lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "maker/ad.hpp"
#include "maker/kinematics.hpp"

namespace maker::prompt_lm {

namespace {

// Mirrors resources/prompt_template_v1.txt.
constexpr const char* kTemplateV1 =
    "Task: predict the next {p} positions of a vessel from its last {h} AIS records.\n"
    "Dataset: {dataset}.\n"
    "Longitude range: min {lon_min}, median {lon_med}, max {lon_max}.\n"
    "Latitude range: min {lat_min}, median {lat_med}, max {lat_max}.\n"
    "Sampling: mean interval: {dt_mean} s, std: {dt_std} s.\n"
    "Mean speed over ground: {sog_mean} knots. Mean course over ground: {cog_mean} degrees.\n"
    "History positions (lon lat): {history}\n";

std::string fmt(double v, int decimals = 5) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

void substitute(std::string& text, const std::string& key, const std::string& value) {
    const std::string slot = "{" + key + "}";
    const auto pos = text.find(slot);
    if (pos == std::string::npos)
        throw std::logic_error("prompt template missing slot: " + slot);
    text.replace(pos, slot.size(), value);
}

}  // namespace

std::string build_prompt(const data::TrajectorySample& sample,
                         const std::string& dataset_name) {
    if (sample.history.empty())
        throw std::invalid_argument("build_prompt: empty history");
    std::vector<double> lons, lats, sogs, cogs, dts;
    for (const auto& r : sample.history) {
        lons.push_back(r.lon);
        lats.push_back(r.lat);
        sogs.push_back(r.sog);
        cogs.push_back(r.cog);
    }
    for (std::size_t i = 0; i + 1 < sample.history.size(); ++i)
        dts.push_back(double(sample.history[i + 1].timestamp -
                             sample.history[i].timestamp));
    auto mean = [](const std::vector<double>& xs) {
        double s = 0.0;
        for (double x : xs) s += x;
        return xs.empty() ? 0.0 : s / double(xs.size());
    };

    std::string text = kTemplateV1;
    substitute(text, "p", std::to_string(sample.future_positions.size()));
    substitute(text, "h", std::to_string(sample.history.size()));
    substitute(text, "dataset", dataset_name);
    substitute(text, "lon_min", fmt(*std::min_element(lons.begin(), lons.end())));
    substitute(text, "lon_med", fmt(median(lons)));
    substitute(text, "lon_max", fmt(*std::max_element(lons.begin(), lons.end())));
    substitute(text, "lat_min", fmt(*std::min_element(lats.begin(), lats.end())));
    substitute(text, "lat_med", fmt(median(lats)));
    substitute(text, "lat_max", fmt(*std::max_element(lats.begin(), lats.end())));
    substitute(text, "dt_mean", fmt(mean(dts), 1));
    substitute(text, "dt_std", fmt(kinematics::population_std(dts), 1));
    substitute(text, "sog_mean", fmt(mean(sogs)));
    substitute(text, "cog_mean", fmt(mean(cogs)));
    std::string hist;
    for (const auto& r : sample.history) {
        hist += fmt(r.lon);
        hist += ' ';
        hist += fmt(r.lat);
        hist += ' ';
    }
    if (!hist.empty()) hist.pop_back();
    substitute(text, "history", hist);
    return text;
}

TokenizeResult tokenize(const std::string& text, const FrozenLMProvider& provider) {
    TokenizeResult out;
    out.token_ids = provider.tokenize(text);
    const int limit = provider.context_limit();
    if (int(out.token_ids.size()) > limit) {
        out.truncated_tokens = int(out.token_ids.size()) - limit;
        out.token_ids.resize(std::size_t(limit));
    }
    return out;
}

Mat embed_tokens(const std::vector<int>& token_ids, const FrozenLMProvider& provider) {
    for (int id : token_ids)
        if (id < 0 || id >= provider.vocab_size())
            throw std::invalid_argument("embed_tokens: token id out of vocabulary");
    return provider.embed(token_ids);
}

StubProvider::StubProvider(int vocab_size, int embed_width, std::uint64_t seed,
                           int context_limit)
    : vocab_size_(vocab_size), context_limit_(context_limit) {
    table_.resize(vocab_size, embed_width);
    for (int r = 0; r < vocab_size; ++r) {
        std::mt19937_64 rng(seed * 0x100000001b3ULL + std::uint64_t(r));
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (int c = 0; c < embed_width; ++c) table_(r, c) = u(rng);
    }
}

std::vector<int> StubProvider::tokenize(const std::string& text) const {
    std::vector<int> ids;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        const std::uint64_t h = ad::fnv1a(tok.data(), tok.size());
        ids.push_back(int(h % std::uint64_t(vocab_size_)));
    }
    return ids;
}

Mat StubProvider::embed(const std::vector<int>& token_ids) const {
    Mat out(Eigen::Index(token_ids.size()), table_.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        out.row(i) = table_.row(token_ids[std::size_t(i)]);
    return out;
}

std::uint64_t StubProvider::checksum() const {
    return ad::fnv1a(table_.data(), sizeof(double) * std::size_t(table_.size()));
}

PretrainedEmbeddingProvider::PretrainedEmbeddingProvider(const std::string& model_dir) {
    std::ifstream cfg(model_dir + "/lm_config.json");
    if (!cfg) throw std::runtime_error("cannot open " + model_dir + "/lm_config.json");
    // tiny flat config, parsed without bringing in the json dependency here
    std::string all((std::istreambuf_iterator<char>(cfg)),
                    std::istreambuf_iterator<char>());
    auto grab = [&](const std::string& key) {
        const auto pos = all.find("\"" + key + "\"");
        if (pos == std::string::npos)
            throw std::runtime_error("lm_config.json missing key: " + key);
        const auto colon = all.find(':', pos);
        return std::strtol(all.c_str() + colon + 1, nullptr, 10);
    };
    const long vocab = grab("vocab_size");
    const long width = grab("embed_width");
    context_limit_ = int(grab("context_limit"));

    std::ifstream vf(model_dir + "/vocab.txt");
    if (!vf) throw std::runtime_error("cannot open " + model_dir + "/vocab.txt");
    std::string line;
    while (std::getline(vf, line)) vocab_.push_back(line);
    if (long(vocab_.size()) != vocab)
        throw std::runtime_error("vocab.txt size does not match lm_config.json");

    std::ifstream ef(model_dir + "/embeddings.f32", std::ios::binary);
    if (!ef) throw std::runtime_error("cannot open " + model_dir + "/embeddings.f32");
    std::vector<float> raw(std::size_t(vocab * width));
    ef.read(reinterpret_cast<char*>(raw.data()),
            std::streamsize(raw.size() * sizeof(float)));
    if (ef.gcount() != std::streamsize(raw.size() * sizeof(float)))
        throw std::runtime_error("embeddings.f32 truncated");
    table_.resize(vocab, width);
    for (long r = 0; r < vocab; ++r)
        for (long c = 0; c < width; ++c)
            table_(r, c) = double(raw[std::size_t(r * width + c)]);
}

std::vector<int> PretrainedEmbeddingProvider::tokenize(const std::string& text) const {
    // greedy longest-match over the vocabulary, per whitespace-separated word
    std::vector<int> ids;
    std::istringstream in(text);
    std::string word;
    while (in >> word) {
        std::size_t pos = 0;
        while (pos < word.size()) {
            int best = -1;
            std::size_t best_len = 0;
            for (std::size_t i = 0; i < vocab_.size(); ++i) {
                const std::string& v = vocab_[i];
                if (v.empty() || v.size() <= best_len) continue;
                if (word.compare(pos, v.size(), v) == 0) {
                    best = int(i);
                    best_len = v.size();
                }
            }
            if (best < 0) {
                ++pos;  // unmappable byte, skip
            } else {
                ids.push_back(best);
                pos += best_len;
            }
        }
    }
    return ids;
}

Mat PretrainedEmbeddingProvider::embed(const std::vector<int>& token_ids) const {
    Mat out(Eigen::Index(token_ids.size()), table_.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        out.row(i) = table_.row(token_ids[std::size_t(i)]);
    return out;
}

std::uint64_t PretrainedEmbeddingProvider::checksum() const {
    return ad::fnv1a(table_.data(), sizeof(double) * std::size_t(table_.size()));
}

std::unique_ptr<FrozenLMProvider> make_provider(const std::string& key, int stub_vocab,
                                                int stub_width, std::uint64_t stub_seed) {
    if (key == "stub")
        return std::make_unique<StubProvider>(stub_vocab, stub_width, stub_seed);
    const std::string prefix = "pretrained:";
    if (key.rfind(prefix, 0) == 0)
        return std::make_unique<PretrainedEmbeddingProvider>(key.substr(prefix.size()));
    throw std::invalid_argument("unknown lm_provider: " + key);
}

}  // namespace maker::prompt_lm
