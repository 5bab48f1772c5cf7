// handsdown: command-line front end for the pipeline, corpus synthesis,
// decoders, evaluation and the typing service.

#include "server.hpp"

#include "handsdown/decoders.hpp"
#include "handsdown/metrics.hpp"
#include "handsdown/noise.hpp"
#include "handsdown/session.hpp"
#include "handsdown/stack.hpp"
#include "handsdown/touch.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#ifndef HANDSDOWN_DATA_DIR
#define HANDSDOWN_DATA_DIR "data"
#endif

using namespace handsdown;
using nlohmann::json;

namespace {

const std::string kDefaultLexicon = std::string(HANDSDOWN_DATA_DIR) + "/english-10000.txt";

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

KeyLayout load_layout(const std::string& path) { return path.empty() ? KeyLayout::qwerty() : KeyLayout::load(path); }

std::vector<NoisePair> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    return read_corpus_tsv(in);
}

// --- replay ---------------------------------------------------------------

struct ReplayArgs {
    std::string log, layout, out;
};

int cmd_replay(const ReplayArgs& a) {
    const KeyLayout layout = load_layout(a.layout);
    const auto events = load_touch_log(a.log);
    std::ofstream file;
    if (!a.out.empty()) file = open_out(a.out);
    std::ostream& out = a.out.empty() ? std::cout : file;
    for (const WordOutput& w : replay_log(events, layout, PipelineConfig{})) {
        json reps = json::array();
        for (const Representative& r : w.output.representatives) {
            reps.push_back(json{{"thread", r.thread}, {"x", r.pos.x}, {"y", r.pos.y}, {"onset", r.onset}});
        }
        out << json{{"session", w.session},
                    {"word_id", w.word_id},
                    {"letters", w.output.letters},
                    {"representatives", std::move(reps)},
                    {"suppressed", w.output.suppressed},
                    {"discarded_clusters", w.output.discarded_clusters}}
                   .dump()
            << '\n';
    }
    return 0;
}

// --- synth / fit ----------------------------------------------------------

struct SynthArgs {
    std::string lexicon = kDefaultLexicon, layout, model, out, report;
    std::size_t size = 30000;
    std::uint64_t seed = SynthConfig{}.seed;
    bool with_touches = false;
};

int cmd_synth(const SynthArgs& a) {
    const KeyLayout layout = load_layout(a.layout);
    const Lexicon lexicon = Lexicon::load(a.lexicon);
    const NoiseModel model = a.model.empty() ? NoiseModel::defaults(layout) : NoiseModel::load(a.model);
    SynthConfig cfg;
    cfg.seed = a.seed;
    cfg.with_touches = a.with_touches;
    const Corpus corpus = balance_corpus(lexicon, a.size, model, layout, cfg);
    auto out = open_out(a.out);
    write_corpus_tsv(out, corpus.pairs, a.with_touches);

    json regimes = json::array();
    for (const RegimeBalance& r : corpus.report.regimes) {
        regimes.push_back(json{{"e_max", r.e_max}, {"target", r.target}, {"bins", r.bins},
                               {"max_deviation", r.max_deviation()}});
    }
    const json report{{"pairs", corpus.pairs.size()},  {"complete", corpus.report.complete},
                      {"attempts", corpus.report.attempts}, {"rejected", corpus.report.rejected},
                      {"synthesis_failures", corpus.report.synthesis_failures}, {"regimes", regimes}};
    if (!a.report.empty()) open_out(a.report) << report.dump(2) << '\n';
    std::cerr << report.dump() << '\n';
    return corpus.report.complete ? 0 : 2;
}

struct FitArgs {
    std::string logs, gold, layout, out;
};

int cmd_fit(const FitArgs& a) {
    const KeyLayout layout = load_layout(a.layout);
    const auto events = load_touch_log(a.logs);
    std::map<std::string, std::string> gold;
    if (!a.gold.empty()) {
        // session <TAB> word_id <TAB> word
        for (const std::string& line : read_lines(a.gold)) {
            std::istringstream ss(line);
            std::string session, word;
            int id = 0;
            if (!(std::getline(ss, session, '\t') && ss >> id >> word)) throw std::runtime_error("bad gold line: " + line);
            gold[session + "/" + std::to_string(id)] = word;
        }
    }
    NoiseFitReport rep;
    const NoiseModel model = fit_noise_model(events, gold, layout, PipelineConfig{}, &rep);
    model.save(a.out);
    std::cerr << json{{"clusters", rep.clusters},
                      {"annotated_clusters", rep.annotated_clusters},
                      {"human_pairs", rep.human_pairs},
                      {"offset_samples", rep.offsets.total_samples},
                      {"pooled_letters", std::string(rep.offsets.pooled_letters.begin(), rep.offsets.pooled_letters.end())}}
                     .dump()
              << '\n';
    return 0;
}

// --- decode / eval / tune -------------------------------------------------

struct DecodeArgs {
    std::string backend = "ngram", corpus, lexicon = kDefaultLexicon, layout, out, endpoint;
    int k = 5;
    double alpha = NgramDecoderConfig{}.alpha;
    double timeout_ms = 500.0;
};

StackOptions stack_options(const std::string& lexicon, const std::string& layout, double alpha,
                           const std::string& endpoint, double timeout_ms) {
    StackOptions opts;
    opts.lexicon = lexicon;
    if (!layout.empty()) opts.layout = layout;
    opts.ngram.alpha = alpha;
    if (!endpoint.empty()) {
        RemoteDecoderConfig rc;
        rc.endpoint = endpoint;
        rc.timeout_ms = timeout_ms;
        opts.remote = rc;
    }
    return opts;
}

int cmd_decode(const DecodeArgs& a) {
    const DecoderStack stack(stack_options(a.lexicon, a.layout, a.alpha, a.endpoint, a.timeout_ms));
    const auto pairs = load_corpus(a.corpus);
    auto out = open_out(a.out);
    for (const NoisePair& p : pairs) {
        DecodeInput input{p.noisy, std::nullopt};
        if (!p.touches.empty()) input.touches = p.touches;
        const DecodeResult res = decode(input, a.backend, stack.registry(), a.k);
        json ranked = json::array();
        for (const Candidate& c : res.ranked) {
            ranked.push_back(json{{"word", c.word}, {"score", c.score}, {"literal", c.literal}});
        }
        out << json{{"input", p.noisy}, {"gold", p.gold}, {"ranked", std::move(ranked)}, {"degraded", res.degraded}}.dump()
            << '\n';
    }
    return 0;
}

struct EvalArgs {
    std::string decoded, corpus, out, csv, backend = "ngram";
    int k_max = 5;
};

int cmd_eval(const EvalArgs& a) {
    const auto pairs = load_corpus(a.corpus);
    const auto lines = read_lines(a.decoded);
    if (lines.size() != pairs.size()) throw std::runtime_error("decode output and corpus differ in length");
    std::vector<TrialRecord> trials;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const json j = json::parse(lines[i]);
        TrialRecord t;
        t.gold = j.contains("gold") ? j["gold"].get<std::string>() : pairs[i].gold;
        if (t.gold != pairs[i].gold) throw std::runtime_error("line " + std::to_string(i + 1) + ": gold mismatch");
        for (const json& c : j["ranked"]) t.ranked.push_back(c["word"].get<std::string>());
        t.realized_ed = pairs[i].realized_ed;
        trials.push_back(std::move(t));
    }
    const EvalReport report = topk_report(trials);
    const std::string doc = report_to_json(report, a.backend);
    if (a.out.empty()) std::cout << doc;
    else open_out(a.out) << doc;
    if (!a.csv.empty()) open_out(a.csv) << report_to_csv(report);
    return 0;
}

struct TuneArgs {
    std::string corpus, lexicon = kDefaultLexicon;
    std::vector<double> grid{0.5, 1, 2, 3, 4, 5, 6, 8, 10, 15};
};

int cmd_tune(const TuneArgs& a) {
    const Lexicon lexicon = Lexicon::load(a.lexicon);
    const CharNgramLM lm = CharNgramLM::train(lexicon);
    NgramDecoder decoder(lexicon, lm);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const NoisePair& p : load_corpus(a.corpus)) pairs.emplace_back(p.noisy, p.gold);
    const TuneResult res = tune_alpha(decoder, pairs, a.grid);
    json grid = json::array();
    for (const auto& [alpha, em1] : res.grid) grid.push_back(json{{"alpha", alpha}, {"em1", em1}});
    std::cout << json{{"best_alpha", res.alpha}, {"best_em1", res.em1}, {"grid", grid}}.dump(2) << '\n';
    return 0;
}

// --- interval study -------------------------------------------------------

struct IntervalArgs {
    std::string logs;
    double threshold = 100.0;
    double jitter = 0.0;
    int reps = 10000;
    std::uint64_t seed = IntervalStudyConfig{}.seed;
};

int cmd_interval(const IntervalArgs& a) {
    const auto events = load_touch_log(a.logs);
    const auto gaps = intentional_gaps(events);
    std::vector<double> thresholds{a.threshold};
    if (a.jitter > 0) thresholds = {a.threshold - a.jitter, a.threshold, a.threshold + a.jitter};
    json results = json::array();
    for (double th : thresholds) {
        IntervalStudyConfig cfg;
        cfg.threshold_ms = th;
        cfg.bootstrap_reps = a.reps;
        cfg.seed = a.seed;
        const IntervalStudyResult r = interval_study(gaps, cfg);
        results.push_back(json{{"threshold_ms", th},
                               {"fraction", r.fraction},
                               {"ci", {r.ci_low, r.ci_high}},
                               {"median_gap_ms", r.median_gap},
                               {"gaps", r.gap_count},
                               {"per_user", r.per_user}});
    }
    std::cout << json{{"results", results},
                      {"reference", {{"fraction", reference::kIntervalFraction},
                                     {"ci", {reference::kIntervalCiLow, reference::kIntervalCiHigh}}}}}
                     .dump(2)
              << '\n';
    return 0;
}

// --- sessions -------------------------------------------------------------

struct SessionArgs {
    std::string lexicon = kDefaultLexicon, layout, phrases, phrase_set = "default", backend = "ngram";
    std::string log, out, expected;
    std::uint64_t seed = 7;
};

EngineConfig engine_config(const SessionArgs& a) {
    EngineConfig cfg;
    if (!a.phrases.empty()) cfg.phrase_sets[a.phrase_set] = read_lines(a.phrases);
    return cfg;
}

/// Scripted typist: center-biased taps, occasional resting-finger
/// co-contacts, a hand-placement burst per phrase, one word-level
/// correction and one suggestion pick.
int cmd_simulate(const SessionArgs& a) {
    const DecoderStack stack(stack_options(a.lexicon, a.layout, NgramDecoderConfig{}.alpha, "", 500));
    const KeyLayout& layout = stack.layout();
    SessionEngine engine(layout, stack.registry(), engine_config(a));
    const auto& phrases = engine.config().phrase_sets.at(a.phrase_set);

    std::ostringstream log;
    Connection conn(engine);
    conn.set_message_log(&log);
    std::vector<std::string> frames;
    auto send = [&](const json& m) {
        const auto out = conn.handle(m.dump());
        frames.insert(frames.end(), out.begin(), out.end());
    };
    std::mt19937_64 rng(a.seed);
    std::normal_distribution<double> jitter(0.0, 0.15 * layout.key_pitch());
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const std::string left_home = "asdf", right_home = "jkl";
    auto touch = [&](const char* kind, double t, Point p) {
        p = {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)};
        send(json{{"kind", "touch"}, {"e", {{"kind", kind}, {"t", t}, {"x", p.x}, {"y", p.y}}}});
    };
    auto tap = [&](double t, Point p, double hold) {
        touch("down", t, p);
        touch("move", t + hold / 2, {p.x + 0.002, p.y});
        touch("up", t + hold, {p.x + 0.002, p.y});
    };
    auto type_word = [&](const std::string& word, double& t) {
        for (char c : word) {
            const Point center = layout.center(c);
            const Point p{center.x + jitter(rng), center.y + jitter(rng)};
            if (uni(rng) < 0.3) {
                const std::string& home = layout.letter(c).hand == Hand::Left ? left_home : right_home;
                const char rest = home[static_cast<std::size_t>(uni(rng) * static_cast<double>(home.size()))];
                touch("down", t - 20, layout.center(rest));
                touch("down", t, p);
                touch("up", t + 40, layout.center(rest));
                touch("up", t + 70, p);
            } else {
                tap(t, p, 70);
            }
            t += 180 + 80 * uni(rng);
        }
    };

    double t = 0.0;
    send(json{{"kind", "open"}, {"backend", a.backend}, {"phrase_set", a.phrase_set}, {"t", t}});
    for (std::size_t pi = 0; pi < phrases.size(); ++pi) {
        t += 400;
        // Hand placement: all fingers land together.
        const std::string placement = "asdfjkl";
        for (std::size_t i = 0; i < placement.size(); ++i) touch("down", t + 3.0 * static_cast<double>(i), layout.center(placement[i]));
        for (char c : placement) touch("up", t + 90, layout.center(c));
        t += 350;
        const auto words = split_words(phrases[pi]);
        for (std::size_t wi = 0; wi < words.size(); ++wi) {
            type_word(words[wi], t);
            if (wi % 2 == 0) {
                send(json{{"kind", "space"}, {"t", t}});
            } else {
                const KeyGeom& space = layout.key("space");
                tap(t, space.center, 50);
            }
            t += 250;
            if (pi == 2 && wi == 0) {
                send(json{{"kind", "backspace"}, {"t", t}});
                t += 300;
                type_word(words[wi], t);
                send(json{{"kind", "space"}, {"t", t}});
                t += 250;
            }
            if (pi == 4 && wi == 0) {
                send(json{{"kind", "suggest"}, {"rank", 2}});
                send(json{{"kind", "backspace"}, {"t", t}});
                t += 300;
                type_word(words[wi], t);
                send(json{{"kind", "space"}, {"t", t}});
                t += 250;
            }
        }
        send(json{{"kind", "enter"}, {"t", t}});
    }

    open_out(a.out) << log.str();
    const std::string text = fold_committed(frames);
    if (!a.expected.empty()) open_out(a.expected) << text << '\n';
    std::cout << text << '\n';
    return 0;
}

int cmd_session_replay(const SessionArgs& a) {
    const DecoderStack stack(stack_options(a.lexicon, a.layout, NgramDecoderConfig{}.alpha, "", 500));
    SessionEngine engine(stack.layout(), stack.registry(), engine_config(a));
    std::ifstream in(a.log);
    if (!in) throw std::runtime_error("cannot read " + a.log);
    const ReplayReport rep = replay_message_log(in, engine);
    std::cout << rep.committed_text << '\n';
    std::cerr << json{{"inputs", rep.inputs}, {"outputs", rep.outputs}, {"mismatches", rep.mismatches}}.dump() << '\n';
    if (rep.mismatches) std::cerr << rep.first_mismatch << '\n';
    bool ok = rep.mismatches == 0;
    if (!a.expected.empty()) {
        std::ifstream ex(a.expected);
        std::stringstream buf;
        buf << ex.rdbuf();
        ok = ok && buf.str() == rep.committed_text + "\n";
    }
    return ok ? 0 : 1;
}

// --- serve ----------------------------------------------------------------

struct ServeArgs {
    std::string addr = "127.0.0.1:8080", backend = "ngram", lexicon = kDefaultLexicon, layout, phrases, log_dir,
                endpoint;
};

Server* g_server = nullptr;

int cmd_serve(const ServeArgs& a) {
    const DecoderStack stack(stack_options(a.lexicon, a.layout, NgramDecoderConfig{}.alpha, a.endpoint, 500));
    if (!stack.registry().contains(a.backend)) throw UnknownBackend("unknown backend: " + a.backend);
    SessionArgs sa;
    sa.phrases = a.phrases;
    SessionEngine engine(stack.layout(), stack.registry(), engine_config(sa));

    ServerOptions opts;
    const auto colon = a.addr.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("--addr must be host:port");
    opts.address = a.addr.substr(0, colon);
    opts.port = static_cast<std::uint16_t>(std::stoi(a.addr.substr(colon + 1)));
    if (!a.log_dir.empty()) opts.log_dir = a.log_dir;
    Server server(engine, stack.layout().to_json(), opts);
    const auto port = server.listen();
    std::cerr << "listening on " << opts.address << ':' << port << " (ws + GET /layout.json)\n";
    g_server = &server;
    std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
    std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
    server.run();
    g_server = nullptr;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hands-down touch typing decoder"};
    app.require_subcommand(1);

    ReplayArgs replay;
    auto* c_replay = app.add_subcommand("replay", "Run the touch pipeline over a touch log");
    c_replay->add_option("--log", replay.log, "Touch-log JSONL")->required();
    c_replay->add_option("--layout", replay.layout, "Layout JSON (default QWERTY)");
    c_replay->add_option("--out", replay.out, "Output JSONL (default stdout)");

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Synthesize an ED-balanced noisy corpus");
    c_synth->add_option("--lexicon", synth.lexicon);
    c_synth->add_option("--size", synth.size);
    c_synth->add_option("--seed", synth.seed);
    c_synth->add_option("--out", synth.out)->required();
    c_synth->add_option("--model", synth.model, "Noise model snapshot (default bundled model)");
    c_synth->add_option("--layout", synth.layout);
    c_synth->add_option("--report", synth.report, "Balance report JSON");
    c_synth->add_flag("--with-touches", synth.with_touches, "Append a touch-location column");

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit", "Fit the error channels from annotated touch logs");
    c_fit->add_option("--logs", fit.logs)->required();
    c_fit->add_option("--out", fit.out)->required();
    c_fit->add_option("--gold", fit.gold, "TSV: session, word_id, word");
    c_fit->add_option("--layout", fit.layout);

    DecodeArgs dec;
    auto* c_dec = app.add_subcommand("decode", "Decode a corpus");
    c_dec->add_option("--backend", dec.backend)->check(CLI::IsMember({"ngram", "bayes", "remote"}));
    c_dec->add_option("--corpus", dec.corpus)->required();
    c_dec->add_option("--lexicon", dec.lexicon);
    c_dec->add_option("--out", dec.out)->required();
    c_dec->add_option("--layout", dec.layout);
    c_dec->add_option("-k", dec.k);
    c_dec->add_option("--alpha", dec.alpha);
    c_dec->add_option("--endpoint", dec.endpoint, "Remote decoder base URL");
    c_dec->add_option("--timeout-ms", dec.timeout_ms);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Top-k report for decoded output");
    c_eval->add_option("--decoded", ev.decoded)->required();
    c_eval->add_option("--corpus", ev.corpus)->required();
    c_eval->add_option("--out", ev.out);
    c_eval->add_option("--csv", ev.csv);
    c_eval->add_option("--backend", ev.backend, "Label for the report");

    TuneArgs tune;
    auto* c_tune = app.add_subcommand("tune", "Grid-search the n-gram edit-distance weight");
    c_tune->add_option("--corpus", tune.corpus)->required();
    c_tune->add_option("--lexicon", tune.lexicon);
    c_tune->add_option("--grid", tune.grid);

    IntervalArgs iv;
    auto* c_iv = app.add_subcommand("interval", "Inter-onset interval study");
    c_iv->add_option("--logs", iv.logs)->required();
    c_iv->add_option("--threshold", iv.threshold);
    c_iv->add_option("--jitter", iv.jitter, "Also report threshold +/- jitter");
    c_iv->add_option("--reps", iv.reps);
    c_iv->add_option("--seed", iv.seed);

    SessionArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Script a typing session and record its message log");
    c_sim->add_option("--phrases", sim.phrases)->required();
    c_sim->add_option("--out", sim.out)->required();
    c_sim->add_option("--expected", sim.expected, "Write the committed transcript here");
    c_sim->add_option("--lexicon", sim.lexicon);
    c_sim->add_option("--backend", sim.backend);
    c_sim->add_option("--seed", sim.seed);

    SessionArgs srep;
    auto* c_srep = app.add_subcommand("session-replay", "Replay a recorded message log");
    c_srep->add_option("--log", srep.log)->required();
    c_srep->add_option("--phrases", srep.phrases);
    c_srep->add_option("--expected", srep.expected);
    c_srep->add_option("--lexicon", srep.lexicon);

    ServeArgs serve;
    auto* c_serve = app.add_subcommand("serve", "Run the WebSocket typing service");
    c_serve->add_option("--addr", serve.addr);
    c_serve->add_option("--backend", serve.backend);
    c_serve->add_option("--lexicon", serve.lexicon);
    c_serve->add_option("--layout", serve.layout);
    c_serve->add_option("--phrases", serve.phrases);
    c_serve->add_option("--log-dir", serve.log_dir);
    c_serve->add_option("--endpoint", serve.endpoint, "Remote decoder base URL");

    std::string layout_out;
    auto* c_layout = app.add_subcommand("layout", "Write the default layout JSON");
    c_layout->add_option("--out", layout_out);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*c_replay) return cmd_replay(replay);
        if (*c_synth) return cmd_synth(synth);
        if (*c_fit) return cmd_fit(fit);
        if (*c_dec) return cmd_decode(dec);
        if (*c_eval) return cmd_eval(ev);
        if (*c_tune) return cmd_tune(tune);
        if (*c_iv) return cmd_interval(iv);
        if (*c_sim) return cmd_simulate(sim);
        if (*c_srep) return cmd_session_replay(srep);
        if (*c_serve) return cmd_serve(serve);
        if (*c_layout) {
            const std::string doc = KeyLayout::qwerty().to_json();
            if (layout_out.empty()) std::cout << doc;
            else open_out(layout_out) << doc;
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
