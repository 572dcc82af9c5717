#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "owml/io.hpp"
#include "owml/othello.hpp"

namespace owml {

// 66-token vocabulary: 0..63 tile indices, 64 = PAD, 65 = EOS.
constexpr int kVocab = 66;
constexpr int kPadToken = 64;
constexpr int kEosToken = 65;

using TokenSequence = std::vector<int>;

struct EmptyGame : std::runtime_error {
    EmptyGame() : std::runtime_error("cannot tokenize a game with no moves") {}
};

struct DatasetManifest {
    std::uint32_t n_games = 0;
    std::uint64_t seed = 0;
    int max_seq_len = 61;       // 60 moves + EOS
    int states_per_game = 52;

    void validate() const {
        if (n_games < 1) throw std::invalid_argument("manifest: n_games must be >= 1");
        if (states_per_game < 1 || states_per_game > 60)
            throw std::invalid_argument("manifest: states_per_game must be in [1, 60]");
        if (max_seq_len < 2)
            throw std::invalid_argument("manifest: max_seq_len must be >= 2");
    }
};

// Moves become tile tokens, EOS closes the game, PAD fills the tail. Games
// longer than max_seq_len - 1 moves are truncated before the EOS.
inline TokenSequence tokenize(const GameRecord& g, int max_seq_len) {
    if (g.moves.empty()) throw EmptyGame();
    TokenSequence out;
    out.reserve(max_seq_len);
    const std::size_t keep =
        std::min(g.moves.size(), std::size_t(max_seq_len - 1));
    for (std::size_t i = 0; i < keep; ++i) out.push_back(int(g.moves[i]));
    out.push_back(kEosToken);
    while (int(out.size()) < max_seq_len) out.push_back(kPadToken);
    return out;
}

inline std::vector<Tile> detokenize(const TokenSequence& tokens) {
    std::vector<Tile> moves;
    for (int t : tokens) {
        if (t == kEosToken || t == kPadToken) break;
        moves.push_back(Tile(t));
    }
    return moves;
}

// Games are generated from seeds manifest.seed, seed+1, ... so the file is a
// pure function of the manifest.
inline std::vector<std::vector<Tile>> generate_games(const DatasetManifest& m) {
    m.validate();
    std::vector<std::vector<Tile>> games;
    games.reserve(m.n_games);
    for (std::uint32_t i = 0; i < m.n_games; ++i)
        games.push_back(random_game(m.seed + i).moves);
    return games;
}

inline void generate_dataset(const DatasetManifest& m, const std::string& path) {
    write_transcripts(path, generate_games(m));
}

}  // namespace owml
