#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "owml/rng.hpp"

namespace owml {

// Tiles are indexed row-major: index = row * 8 + col, a1 = 0, h8 = 63.
using Tile = std::uint8_t;

enum class Player : std::uint8_t { Black = 0, White = 1 };

inline Player other(Player p) {
    return p == Player::Black ? Player::White : Player::Black;
}

inline int tile_row(Tile t) { return t / 8; }
inline int tile_col(Tile t) { return t % 8; }

struct IllegalMove : std::runtime_error {
    explicit IllegalMove(Tile t)
        : std::runtime_error("illegal move at tile " + std::to_string(int(t))) {}
};

struct Board {
    std::uint64_t black = 0;
    std::uint64_t white = 0;
    Player to_move = Player::Black;

    std::uint64_t occupied() const { return black | white; }
    std::uint64_t own() const { return to_move == Player::Black ? black : white; }
    std::uint64_t opp() const { return to_move == Player::Black ? white : black; }
    std::uint64_t mask_of(Player p) const { return p == Player::Black ? black : white; }

    bool operator==(const Board&) const = default;
};

struct GameRecord {
    std::vector<Tile> moves;
    Board final_board;
};

struct StabilityMap {
    std::uint64_t stable_mask = 0;
};

enum class TileMode : std::uint8_t { Empty = 0, Own = 1, Enemy = 2 };

enum class EdgeAdjacency : std::uint8_t { Four, Eight };

namespace bb {

constexpr std::uint64_t kFileA = 0x0101010101010101ULL;
constexpr std::uint64_t kFileH = 0x8080808080808080ULL;
constexpr std::uint64_t kNotA = ~kFileA;
constexpr std::uint64_t kNotH = ~kFileH;
constexpr std::uint64_t kBorder = 0xff818181818181ffULL;
constexpr std::uint64_t kCorners = 0x8100000000000081ULL;

inline std::uint64_t east(std::uint64_t x) { return (x & kNotH) << 1; }
inline std::uint64_t west(std::uint64_t x) { return (x & kNotA) >> 1; }
inline std::uint64_t south(std::uint64_t x) { return x << 8; }
inline std::uint64_t north(std::uint64_t x) { return x >> 8; }
inline std::uint64_t south_east(std::uint64_t x) { return (x & kNotH) << 9; }
inline std::uint64_t south_west(std::uint64_t x) { return (x & kNotA) << 7; }
inline std::uint64_t north_east(std::uint64_t x) { return (x & kNotH) >> 7; }
inline std::uint64_t north_west(std::uint64_t x) { return (x & kNotA) >> 9; }

inline std::uint64_t neighbors4(std::uint64_t x) {
    return east(x) | west(x) | north(x) | south(x);
}

inline std::uint64_t neighbors8(std::uint64_t x) {
    return neighbors4(x) | north_east(x) | north_west(x) | south_east(x) |
           south_west(x);
}

// Dumb7-style flood for one direction: discs of `opp` bracketable from `own`.
template <std::uint64_t (*Shift)(std::uint64_t)>
inline std::uint64_t line_attacks(std::uint64_t own, std::uint64_t opp) {
    std::uint64_t flood = Shift(own) & opp;
    flood |= Shift(flood) & opp;
    flood |= Shift(flood) & opp;
    flood |= Shift(flood) & opp;
    flood |= Shift(flood) & opp;
    flood |= Shift(flood) & opp;
    return flood;
}

inline std::uint64_t legal_mask(std::uint64_t own, std::uint64_t opp) {
    const std::uint64_t empty = ~(own | opp);
    std::uint64_t moves = 0;
    moves |= east(line_attacks<east>(own, opp));
    moves |= west(line_attacks<west>(own, opp));
    moves |= north(line_attacks<north>(own, opp));
    moves |= south(line_attacks<south>(own, opp));
    moves |= north_east(line_attacks<north_east>(own, opp));
    moves |= north_west(line_attacks<north_west>(own, opp));
    moves |= south_east(line_attacks<south_east>(own, opp));
    moves |= south_west(line_attacks<south_west>(own, opp));
    return moves & empty;
}

template <std::uint64_t (*Shift)(std::uint64_t)>
inline std::uint64_t flips_in_dir(std::uint64_t move_bit, std::uint64_t own,
                                  std::uint64_t opp) {
    std::uint64_t flood = Shift(move_bit) & opp;
    flood |= Shift(flood) & opp;
    flood |= Shift(flood) & opp;
    flood |= Shift(flood) & opp;
    flood |= Shift(flood) & opp;
    flood |= Shift(flood) & opp;
    // Bracket closes only if the flood runs into an own disc.
    return (Shift(flood) & own) ? flood : 0;
}

inline std::uint64_t flips(std::uint64_t move_bit, std::uint64_t own,
                           std::uint64_t opp) {
    std::uint64_t f = 0;
    f |= flips_in_dir<east>(move_bit, own, opp);
    f |= flips_in_dir<west>(move_bit, own, opp);
    f |= flips_in_dir<north>(move_bit, own, opp);
    f |= flips_in_dir<south>(move_bit, own, opp);
    f |= flips_in_dir<north_east>(move_bit, own, opp);
    f |= flips_in_dir<north_west>(move_bit, own, opp);
    f |= flips_in_dir<south_east>(move_bit, own, opp);
    f |= flips_in_dir<south_west>(move_bit, own, opp);
    return f;
}

inline Tile nth_set_bit(std::uint64_t mask, unsigned n) {
    for (unsigned i = 0; i < n; ++i) mask &= mask - 1;
    return static_cast<Tile>(std::countr_zero(mask));
}

}  // namespace bb

inline Board initial_board() {
    Board b;
    b.white = (1ULL << 27) | (1ULL << 36);  // d4, e5
    b.black = (1ULL << 28) | (1ULL << 35);  // e4, d5
    b.to_move = Player::Black;
    return b;
}

inline std::uint64_t legal_moves(const Board& b) {
    return bb::legal_mask(b.own(), b.opp());
}

inline std::vector<Tile> legal_move_list(const Board& b) {
    std::vector<Tile> out;
    std::uint64_t m = legal_moves(b);
    while (m) {
        out.push_back(static_cast<Tile>(std::countr_zero(m)));
        m &= m - 1;
    }
    return out;
}

// Places the mover's disc and flips every bracketed line. Pass handling is
// the caller's job (see random_game / replay).
inline Board apply_move(const Board& b, Tile t) {
    const std::uint64_t move_bit = 1ULL << t;
    if (!(legal_moves(b) & move_bit)) throw IllegalMove(t);
    const std::uint64_t f = bb::flips(move_bit, b.own(), b.opp());
    Board out = b;
    if (b.to_move == Player::Black) {
        out.black |= move_bit | f;
        out.white &= ~f;
    } else {
        out.white |= move_bit | f;
        out.black &= ~f;
    }
    out.to_move = other(b.to_move);
    return out;
}

// Uniform random legal moves until neither side can move. A side with no
// legal move passes silently; passes emit no move token.
inline GameRecord random_game(std::uint64_t seed) {
    GameRecord g;
    Rng rng(seed);
    Board b = initial_board();
    int consecutive_passes = 0;
    while (consecutive_passes < 2) {
        const std::uint64_t m = legal_moves(b);
        if (m == 0) {
            b.to_move = other(b.to_move);
            ++consecutive_passes;
            continue;
        }
        consecutive_passes = 0;
        const unsigned n = static_cast<unsigned>(std::popcount(m));
        const Tile t = bb::nth_set_bit(m, static_cast<unsigned>(rng.below(n)));
        b = apply_move(b, t);
        g.moves.push_back(t);
    }
    g.final_board = b;
    return g;
}

// Board state AFTER each move, paired with the player who made it. Replay
// skips passes the same way generation does.
inline std::vector<std::pair<Board, Player>> board_trajectory(const GameRecord& g) {
    std::vector<std::pair<Board, Player>> out;
    out.reserve(g.moves.size());
    Board b = initial_board();
    for (Tile t : g.moves) {
        if (legal_moves(b) == 0) b.to_move = other(b.to_move);
        const Player mover = b.to_move;
        b = apply_move(b, t);
        out.emplace_back(b, mover);
    }
    return out;
}

// Least fixpoint of the occupied-tile stability rules: corners, edge tiles
// adjacent to a stable tile, interior tiles with all 8 neighbors stable.
// Color is ignored.
inline StabilityMap stability_map(const Board& b,
                                  EdgeAdjacency adj = EdgeAdjacency::Four) {
    const std::uint64_t occ = b.occupied();
    const std::uint64_t interior = ~bb::kBorder;
    std::uint64_t stable = 0;
    for (;;) {
        std::uint64_t next = stable;
        next |= bb::kCorners & occ;
        const std::uint64_t reach = adj == EdgeAdjacency::Four
                                        ? bb::neighbors4(stable)
                                        : bb::neighbors8(stable);
        next |= bb::kBorder & occ & reach;
        // Interior rule: every one of the 8 neighbors is already stable.
        const std::uint64_t all8 =
            bb::east(stable) & bb::west(stable) & bb::north(stable) &
            bb::south(stable) & bb::north_east(stable) & bb::north_west(stable) &
            bb::south_east(stable) & bb::south_west(stable);
        next |= interior & occ & all8;
        if (next == stable) break;
        stable = next;
    }
    return StabilityMap{stable};
}

// Per-tile binary labels for one mode, relative to `perspective`.
inline std::uint64_t tile_labels(const Board& b, Player perspective, TileMode mode) {
    switch (mode) {
        case TileMode::Empty:
            return ~b.occupied();
        case TileMode::Own:
            return b.mask_of(perspective);
        case TileMode::Enemy:
            return b.mask_of(other(perspective));
    }
    return 0;
}

}  // namespace owml
