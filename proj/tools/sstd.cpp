// Command-line entry point: featurize, g2p, dtw-search, p2w-match,
// confnet-search, evaluate, synth, report.

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sstd/sstd.hpp"

namespace fs = std::filesystem;
using namespace sstd;

namespace {

unsigned default_jobs() {
  if (const char* env = std::getenv("SSTD_JOBS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

UnknownPolicy parse_policy(const std::string& s) {
  if (s == "skip") return UnknownPolicy::skip;
  if (s == "passthrough") return UnknownPolicy::passthrough;
  return UnknownPolicy::error;
}

std::optional<G2PTable> table_from(const std::string& path, bool kunwinjku) {
  if (kunwinjku) return kunwinjku_table();
  if (path.empty()) return std::nullopt;
  return load_g2p_table(path);
}

void add_feature_options(CLI::App* cmd, FeatureConfig& cfg, double& window_ms, double& hop_ms) {
  cmd->add_option("--window-ms", window_ms, "Analysis window length in ms")->capture_default_str();
  cmd->add_option("--hop-ms", hop_ms, "Frame shift in ms")->capture_default_str();
  cmd->add_option("--preemphasis", cfg.preemphasis, "Pre-emphasis coefficient")->capture_default_str();
  cmd->add_option("--num-filters", cfg.num_filters, "Mel filters")->capture_default_str();
  cmd->add_option("--num-ceps", cfg.num_ceps, "Cepstral coefficients kept (C0 included)")->capture_default_str();
  cmd->add_flag("--deltas", cfg.append_deltas, "Append delta and delta-delta coefficients");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spoken term detection toolkit: DTW query-by-example and phone-recognizer matching"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI file; [subcommand] sections set that subcommand's flags");
  unsigned jobs = default_jobs();
  app.add_option("--jobs", jobs, "Worker threads (default $SSTD_JOBS or 1)");

  FeatureConfig feat_cfg;
  double window_ms = 25.0, hop_ms = 10.0;

  // featurize
  auto* featurize = app.add_subcommand("featurize", "WAV files -> MFCC (+CMVN) feature files");
  std::vector<std::string> feat_inputs;
  std::string feat_out;
  bool no_cmvn = false;
  featurize->add_option("inputs", feat_inputs, "WAV files or directories of WAV files")->required();
  featurize->add_option("--out-dir", feat_out, "Output directory for <stem>.feat")->required();
  featurize->add_flag("--no-cmvn", no_cmvn, "Skip cepstral mean and variance normalization");
  featurize->add_option("--jobs", jobs, "Worker threads");
  add_feature_options(featurize, feat_cfg, window_ms, hop_ms);

  // g2p
  auto* g2p = app.add_subcommand("g2p", "Transliterate stdin lines between graphemes and phones");
  std::string g2p_table_path, g2p_direction = "to-phones", g2p_unknown = "error";
  bool g2p_kunwinjku = false;
  g2p->add_option("--table", g2p_table_path, "Grapheme<TAB>phone table");
  g2p->add_flag("--kunwinjku", g2p_kunwinjku, "Use the built-in Kunwinjku table");
  g2p->add_option("--direction", g2p_direction, "to-phones | to-graphemes")
      ->check(CLI::IsMember({"to-phones", "to-graphemes"}))
      ->capture_default_str();
  g2p->add_option("--unknown", g2p_unknown, "Unknown symbol policy")
      ->check(CLI::IsMember({"error", "skip", "passthrough"}))
      ->capture_default_str();

  // dtw-search
  auto* dtw = app.add_subcommand("dtw-search", "Query-by-example DTW search of lexicon exemplars");
  std::string dtw_lexicon, dtw_collection, dtw_out, dtw_matches, dtw_distance = "euclidean", dtw_mode = "exact";
  std::size_t dtw_band = 0;
  bool dtw_all_spans = false, dtw_no_cmvn = false;
  DtwParams dtw_params;
  dtw->add_option("--lexicon", dtw_lexicon, "Lexicon TSV with exemplar paths")->required();
  dtw->add_option("--collection", dtw_collection, "Directory of utterance .feat files")->required();
  dtw->add_option("--out", dtw_out, "Detections CSV")->required();
  dtw->add_option("--matches", dtw_matches, "Optional match list CSV (query_id,utterance_id,start_s,end_s,score)");
  dtw->add_option("--n-best", dtw_params.n_best, "Matches kept per query")->capture_default_str();
  dtw->add_option("--band", dtw_band, "Sakoe-Chiba band radius in frames (0 = none)");
  dtw->add_option("--distance", dtw_distance, "euclidean | cosine")->check(CLI::IsMember({"euclidean", "cosine"}));
  dtw->add_option("--mode", dtw_mode, "exact | open-begin")->check(CLI::IsMember({"exact", "open-begin"}));
  dtw->add_flag("--all-spans", dtw_all_spans, "Let one utterance contribute several non-overlapping matches");
  dtw->add_option("--jobs", jobs, "Worker threads");
  dtw->add_flag("--no-cmvn", dtw_no_cmvn, "Skip CMVN for WAV exemplars");
  add_feature_options(dtw, feat_cfg, window_ms, hop_ms);

  // p2w-match
  auto* p2w = app.add_subcommand("p2w-match", "Longest-match lexicon words in 1-best phone streams");
  std::string p2w_lexicon, p2w_table, p2w_streams, p2w_out, p2w_durations;
  bool p2w_all = false, p2w_kunwinjku = false;
  p2w->add_option("--lexicon", p2w_lexicon, "Lexicon TSV")->required();
  p2w->add_option("--table", p2w_table, "G2P table for lexicon entries without phones");
  p2w->add_flag("--kunwinjku", p2w_kunwinjku, "Use the built-in Kunwinjku table");
  p2w->add_option("--streams", p2w_streams, "1-best stream file")->required();
  p2w->add_option("--out", p2w_out, "Detections CSV")->required();
  p2w->add_option("--durations", p2w_durations, "utterance_id<TAB>seconds, for interpolated match times");
  p2w->add_flag("--all-occurrences", p2w_all, "Report overlapping matches too");

  // confnet-search
  auto* cn = app.add_subcommand("confnet-search", "Trie-guided search of phone confusion networks");
  std::string cn_lexicon, cn_table, cn_dir, cn_out, cn_label = method::p2w_confnet;
  bool cn_oracle = false, cn_kunwinjku = false;
  SearchParams cn_params;
  cn->add_option("--lexicon", cn_lexicon, "Lexicon TSV")->required();
  cn->add_option("--table", cn_table, "G2P table for lexicon entries without phones");
  cn->add_flag("--kunwinjku", cn_kunwinjku, "Use the built-in Kunwinjku table");
  cn->add_option("--confnets", cn_dir, "Directory of confusion network JSON files")->required();
  cn->add_option("--out", cn_out, "Detections CSV")->required();
  cn->add_option("--threshold", cn_params.prune_threshold, "Pruning threshold")->capture_default_str();
  cn->add_option("--top-k", cn_params.top_k, "Hypotheses considered per slot")->capture_default_str();
  cn->add_option("--min-word-phones", cn_params.min_word_phones, "Shortest word reported")->capture_default_str();
  cn->add_option("--oracle-max-slots", cn_params.oracle_max_slots, "Largest network the oracle accepts")
      ->capture_default_str();
  cn->add_flag("--oracle", cn_oracle, "Exhaustive search instead of the greedy one");
  cn->add_option("--jobs", jobs, "Worker threads");
  cn->add_option("--label", cn_label, "Method label written to the detections")->capture_default_str();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score detection files against a reference alignment");
  std::vector<std::string> ev_inputs;
  std::string ev_reference, ev_lexicon, ev_table, ev_out;
  double ev_overlap = 0.5;
  ev->add_option("detections", ev_inputs, "Detections CSV files")->required();
  ev->add_option("--reference", ev_reference, "Reference alignment JSON")->required();
  ev->add_option("--lexicon", ev_lexicon, "Query lexicon (restricts the reference, gives exemplar speakers)");
  ev->add_option("--table", ev_table, "G2P table for lexicon entries without phones");
  ev->add_option("--overlap-min", ev_overlap, "Minimum intersection-over-union for a hit")->capture_default_str();
  ev->add_option("--out", ev_out, "Report JSON");

  // synth
  auto* syn = app.add_subcommand("synth", "Generate a synthetic corpus with known occurrences");
  SynthSpec spec;
  std::string syn_out = "synth";
  syn->add_option("--out-dir", syn_out, "Output directory")->capture_default_str();
  syn->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  syn->add_option("--lexicon-size", spec.lexicon_size)->capture_default_str();
  syn->add_option("--utterances", spec.utterance_count)->capture_default_str();
  syn->add_option("--occurrences", spec.occurrences_per_word, "Planted occurrences per word")->capture_default_str();
  syn->add_option("--speakers", spec.speakers)->capture_default_str();
  syn->add_option("--dim", spec.feature_dim, "Feature dimension")->capture_default_str();
  syn->add_option("--substitution", spec.noise.substitution)->capture_default_str();
  syn->add_option("--deletion", spec.noise.deletion)->capture_default_str();
  syn->add_option("--insertion", spec.noise.insertion)->capture_default_str();
  syn->add_option("--confusion-k", spec.confusion_k)->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "Render a report JSON as a text table");
  std::string rep_in, rep_out;
  rep->add_option("report", rep_in, "Report JSON from evaluate")->required();
  rep->add_option("--out", rep_out, "Write the table here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  feat_cfg.window_s = window_ms / 1000.0;
  feat_cfg.hop_s = hop_ms / 1000.0;

  try {
    if (*featurize) {
      std::vector<fs::path> wavs;
      for (const auto& in : feat_inputs) {
        if (fs::is_directory(in)) {
          for (auto& p : list_files(in, ".wav")) wavs.push_back(p);
        } else {
          wavs.emplace_back(in);
        }
      }
      std::vector<FeatureMatrix> out(wavs.size());
      util::parallel_for(wavs.size(), jobs, [&](std::size_t i) {
        auto fm = mfcc(load_audio(wavs[i]), feat_cfg);
        out[i] = no_cmvn ? fm : cmvn(fm);
      });
      std::size_t frames = 0;
      for (const auto& fm : out) {
        write_features(fs::path(feat_out) / (fm.utterance_id + ".feat"), fm);
        frames += fm.frames();
      }
      std::cout << "featurize: " << out.size() << " files, " << frames << " frames -> " << feat_out << "\n";
    } else if (*g2p) {
      const auto table = table_from(g2p_table_path, g2p_kunwinjku);
      if (!table) throw Error(Errc::invalid_argument, "g2p needs --table or --kunwinjku");
      const auto policy = parse_policy(g2p_unknown);
      std::string line;
      std::size_t n = 0;
      while (std::getline(std::cin, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (g2p_direction == "to-phones") {
          std::cout << util::join(transliterate_text(util::to_lower_ascii(std::string(util::trim(line))), *table, policy), " ")
                    << "\n";
        } else {
          std::cout << render_text(util::split_ws(line), *table, policy) << "\n";
        }
      }
      std::cerr << "g2p: " << n << " lines (" << g2p_direction << ")\n";
    } else if (*dtw) {
      dtw_params.distance = dtw_distance == "cosine" ? Distance::cosine : Distance::euclidean;
      dtw_params.mode = dtw_mode == "open-begin" ? SubsequenceMode::open_begin : SubsequenceMode::exact;
      if (dtw_band > 0) dtw_params.band_width = dtw_band;
      dtw_params.one_per_utterance = !dtw_all_spans;
      const auto lexicon = load_lexicon(dtw_lexicon, nullptr);
      const auto collection = load_feature_dir(dtw_collection);
      if (collection.empty()) throw Error(Errc::empty_collection, dtw_collection + " holds no .feat files");
      const auto queries = dtw_queries(lexicon, feat_cfg, !dtw_no_cmvn);
      const auto run = run_dtw(queries, collection, dtw_params, jobs);
      util::write_text_file(dtw_out, to_csv(run.detections));
      if (!dtw_matches.empty()) {
        std::string csv = match_csv_header() + "\n";
        for (const auto& m : run.matches) csv += to_csv_row(m, collection.front().frame_shift_s) + "\n";
        util::write_text_file(dtw_matches, csv);
      }
      std::cout << "dtw-search: " << queries.size() << " queries x " << collection.size() << " utterances -> "
                << run.detections.size() << " detections\n";
    } else if (*p2w) {
      const auto table = table_from(p2w_table, p2w_kunwinjku);
      const auto lexicon = load_lexicon(p2w_lexicon, table ? &*table : nullptr);
      const auto trie = build_trie(lexicon);
      const auto streams = load_streams(p2w_streams);
      std::map<std::string, double> durations;
      if (!p2w_durations.empty()) {
        for (const auto& line : util::read_data_lines(p2w_durations)) {
          const auto cols = util::split(line.text, '\t');
          if (cols.size() != 2) throw Error(Errc::parse_error, p2w_durations + ":" + std::to_string(line.line_no));
          durations[cols[0]] = std::stod(cols[1]);
        }
      }
      const auto dets = run_p2w(streams, trie, p2w_all ? ScanMode::all_occurrences : ScanMode::longest,
                                p2w_durations.empty() ? nullptr : &durations);
      util::write_text_file(p2w_out, to_csv(dets));
      std::cout << "p2w-match: " << streams.size() << " streams -> " << dets.size() << " detections\n";
    } else if (*cn) {
      const auto table = table_from(cn_table, cn_kunwinjku);
      const auto lexicon = load_lexicon(cn_lexicon, table ? &*table : nullptr);
      const auto trie = build_trie(lexicon);
      const auto nets = load_confnet_dir(cn_dir);
      const auto dets = run_confnet(nets, trie, cn_params, cn_oracle, jobs, cn_label);
      util::write_text_file(cn_out, to_csv(dets));
      std::cout << "confnet-search: " << nets.size() << " networks, threshold " << cn_params.prune_threshold
                << (cn_oracle ? " (oracle)" : " (greedy)") << " -> " << dets.size() << " detections\n";
    } else if (*ev) {
      std::vector<Detection> dets;
      for (const auto& f : ev_inputs) {
        auto d = load_detections(f);
        dets.insert(dets.end(), d.begin(), d.end());
      }
      auto refs = load_reference(ev_reference);
      std::optional<std::vector<LexiconEntry>> lexicon;
      if (!ev_lexicon.empty()) {
        const auto table = table_from(ev_table, false);
        lexicon = load_lexicon(ev_lexicon, table ? &*table : nullptr);
        refs = restrict_to_lexicon(refs, *lexicon);
      }
      const auto set = evaluate_methods(dets, refs, ev_overlap, lexicon ? &*lexicon : nullptr);
      const auto json = to_json(set);
      if (!ev_out.empty()) util::write_text_file(ev_out, json);
      std::cout << render_report(nlohmann::json::parse(json));
      std::size_t outside = 0;
      for (const auto& r : set.reports) outside += r.detections_outside_reference;
      std::cout << "evaluate: " << dets.size() << " detections, " << refs.size() << " reference tokens";
      if (outside) std::cout << ", " << outside << " detections in utterances absent from the reference (all FP)";
      std::cout << "\n";
    } else if (*syn) {
      const auto corpus = generate(spec);
      write_corpus(corpus, syn_out);
      std::cout << "synth: " << corpus.features.size() << " utterances, " << corpus.lexicon.size() << " words, "
                << corpus.reference.size() << " planted occurrences -> " << syn_out << "\n";
    } else if (*rep) {
      const auto text = render_report(nlohmann::json::parse(util::read_text_file(rep_in)));
      if (rep_out.empty()) std::cout << text;
      else util::write_text_file(rep_out, text);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
