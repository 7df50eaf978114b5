// tokviz: tokenize, inspect or serve MIDI files from the command line.
//
// Exit codes: 0 ok, 2 bad arguments, 3 unreadable or malformed MIDI,
// 4 invalid configuration, 5 could not bind the server port.

#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tokviz/midi.hpp"
#include "tokviz/response.hpp"
#include "tokviz/score.hpp"
#include "tokviz/service.hpp"

namespace {

enum Exit { kOk = 0, kBadArgs = 2, kParseError = 3, kConfigError = 4, kBindError = 5 };

tokviz::Service* g_service = nullptr;

void on_signal(int) {
    if (g_service != nullptr) g_service->stop();
}

std::string seconds_text(double s) {
    return fmt::format("{}", std::round(s * 1000.0) / 1000.0);
}

int run_tokenize(const std::string& schemeText, const std::string& input, const std::vector<std::string>& sets,
                 const std::string& output) {
    const auto scheme = tokviz::parse_scheme(schemeText);
    if (!scheme) {
        std::cerr << "tokviz: unknown scheme '" << schemeText << "'\n";
        return kBadArgs;
    }
    tokviz::GridConfig config;
    try {
        for (const auto& s : sets) tokviz::apply_override(config, s);
        tokviz::validate(config);
    } catch (const tokviz::ConfigError& e) {
        std::cerr << "tokviz: invalid config: " << e.what() << '\n';
        return kConfigError;
    }

    std::string body;
    try {
        const auto bytes = tokviz::midi::read_file(input);
        body = tokviz::tokenize_body(bytes, *scheme, config);
    } catch (const tokviz::midi::SmfError& e) {
        std::cerr << "tokviz: " << input << ": " << tokviz::midi::to_string(e.code()) << ": " << e.what() << '\n';
        return kParseError;
    } catch (const tokviz::ConfigError& e) {
        std::cerr << "tokviz: invalid config: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::runtime_error& e) {
        std::cerr << "tokviz: " << e.what() << '\n';
        return kParseError;
    }

    if (output.empty() || output == "-") {
        std::cout << body;
        std::cout.flush();
    } else {
        std::ofstream out(output, std::ios::binary);
        out << body;
        if (!out) {
            std::cerr << "tokviz: cannot write '" << output << "'\n";
            return kBadArgs;
        }
    }
    return kOk;
}

int run_inspect(const std::string& input, bool json) {
    tokviz::Score score;
    try {
        score = tokviz::build_score(tokviz::midi::parse_smf(tokviz::midi::read_file(input)));
    } catch (const tokviz::midi::SmfError& e) {
        std::cerr << "tokviz: " << input << ": " << tokviz::midi::to_string(e.code()) << ": " << e.what() << '\n';
        return kParseError;
    } catch (const std::runtime_error& e) {
        std::cerr << "tokviz: " << e.what() << '\n';
        return kParseError;
    }
    for (const auto& w : score.warnings) std::cerr << "warning: " << w << '\n';

    const auto meta = tokviz::extract_metadata(score);
    if (json) {
        std::cout << tokviz::metadata_json(meta).dump(2) << '\n';
        return kOk;
    }

    const auto& tempo = meta.tempoMap.front().first;
    const auto& ts = meta.timeSigMap.front().first;
    std::string summary;
    if (meta.pitchMin) summary = fmt::format("pitch range {}–{}, ", *meta.pitchMin, *meta.pitchMax);
    summary += fmt::format("{} notes, {} s, {} bpm, {}/{}", meta.noteCount, seconds_text(meta.durationSeconds),
                           tempo.bpm, ts.numerator, ts.denominator);
    std::cout << summary << '\n';

    std::cout << "ticks per quarter: " << meta.ticksPerQuarter << '\n';
    for (const auto& [e, s] : meta.keySigMap) {
        std::cout << fmt::format("key: {} at {} s\n", tokviz::key_name(e.sharpsFlats, e.mode), seconds_text(s));
    }
    for (const auto& [e, s] : meta.tempoMap) std::cout << fmt::format("tempo: {} bpm at {} s\n", e.bpm, seconds_text(s));
    for (const auto& [e, s] : meta.timeSigMap) {
        std::cout << fmt::format("time signature: {}/{} at {} s\n", e.numerator, e.denominator, seconds_text(s));
    }
    for (std::size_t i = 0; i < score.tracks.size(); ++i) {
        const auto& t = score.tracks[i];
        const auto& r = meta.trackRanges[i];
        const std::string program = t.drums ? "drums" : fmt::format("program {}", t.program);
        std::cout << fmt::format("track {} \"{}\": {}, {} notes, pitch {}–{}\n", t.index, t.name, program,
                                 r.noteCount, r.pitchMin.value_or(0), r.pitchMax.value_or(0));
    }
    return kOk;
}

int run_serve(const tokviz::ServiceOptions& options) {
    tokviz::Service service(options);
    if (!service.bind()) {
        std::cerr << "tokviz: cannot listen on " << options.host << ':' << options.port << '\n';
        return kBindError;
    }
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "tokviz " << tokviz::version() << " listening on " << options.host << ':' << service.port() << '\n';
    service.run();
    g_service = nullptr;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Symbolic music tokenization explorer"};
    app.set_version_flag("--version", std::string(tokviz::version()));
    app.require_subcommand(1);

    std::string scheme;
    std::string input;
    std::vector<std::string> sets;
    std::string output;
    auto* tokenize = app.add_subcommand("tokenize", "Tokenize a MIDI file and print the JSON document");
    tokenize->add_option("--scheme,-s", scheme, "REMI, TSD, MIDILike, Structured, CPWord or Octuple")->required();
    tokenize->add_option("--input,-i", input, "MIDI file")->required();
    tokenize->add_option("--set", sets, "Grid setting override, key=value (repeatable)");
    tokenize->add_option("--output,-o", output, "Output path (default stdout)");

    bool json = false;
    auto* inspect = app.add_subcommand("inspect", "Print musical metadata of a MIDI file");
    inspect->add_option("--input,-i", input, "MIDI file")->required();
    inspect->add_flag("--json", json, "Print the metadata JSON document");

    tokviz::ServiceOptions options;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--port,-p", options.port, "Listen port")->envname("TOKVIZ_PORT")->check(CLI::Range(0, 65535));
    serve->add_option("--host", options.host, "Listen address")->envname("TOKVIZ_HOST");
    serve->add_option("--max-upload-bytes", options.maxUploadBytes, "Largest accepted MIDI upload")
        ->envname("TOKVIZ_MAX_UPLOAD_BYTES");
    serve->add_option("--cors-origin", options.corsOrigin, "Value for Access-Control-Allow-Origin")
        ->envname("TOKVIZ_CORS_ORIGIN");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kBadArgs;
    }

    if (tokenize->parsed()) return run_tokenize(scheme, input, sets, output);
    if (inspect->parsed()) return run_inspect(input, json);
    return run_serve(options);
}
