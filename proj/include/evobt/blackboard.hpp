#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "evobt/geometry.hpp"

namespace evobt {

struct EntityRef {
    int id = -1;
    constexpr bool operator==(const EntityRef&) const = default;
};

enum class ValueType { Integer, Real, Boolean, Position, Entity };

inline const char* to_string(ValueType t) {
    switch (t) {
        case ValueType::Integer: return "integer";
        case ValueType::Real: return "real";
        case ValueType::Boolean: return "boolean";
        case ValueType::Position: return "position";
        case ValueType::Entity: return "entity";
    }
    return "?";
}

inline ValueType value_type_from_string(const std::string& s) {
    if (s == "integer") return ValueType::Integer;
    if (s == "real") return ValueType::Real;
    if (s == "boolean") return ValueType::Boolean;
    if (s == "position") return ValueType::Position;
    if (s == "entity") return ValueType::Entity;
    throw std::invalid_argument("unknown blackboard value type '" + s + "'");
}

/// std::monostate is the "none" value.
using BlackboardValue = std::variant<std::monostate, std::int64_t, double, bool, Vec2, EntityRef>;

inline bool holds_type(const BlackboardValue& v, ValueType t) {
    switch (t) {
        case ValueType::Integer: return std::holds_alternative<std::int64_t>(v);
        case ValueType::Real: return std::holds_alternative<double>(v);
        case ValueType::Boolean: return std::holds_alternative<bool>(v);
        case ValueType::Position: return std::holds_alternative<Vec2>(v);
        case ValueType::Entity: return std::holds_alternative<EntityRef>(v);
    }
    return false;
}

using BlackboardSchema = std::map<std::string, ValueType>;

/// Typed key-value store with a key set fixed at construction.
class Blackboard {
public:
    Blackboard() = default;
    explicit Blackboard(BlackboardSchema schema) : schema_(std::move(schema)) {
        for (const auto& [key, type] : schema_) values_.emplace(key, std::monostate{});
    }

    const BlackboardSchema& schema() const { return schema_; }
    bool declares(const std::string& key) const { return schema_.contains(key); }

    /// Unset and undeclared keys read as none.
    const BlackboardValue& get(const std::string& key) const {
        static const BlackboardValue none{};
        auto it = values_.find(key);
        return it == values_.end() ? none : it->second;
    }

    bool is_set(const std::string& key) const {
        return !std::holds_alternative<std::monostate>(get(key));
    }

    template <class T>
    const T* get_if(const std::string& key) const {
        return std::get_if<T>(&get(key));
    }

    /// Writing none clears the key. Throws on undeclared keys and type changes.
    void set(const std::string& key, BlackboardValue value) {
        auto it = schema_.find(key);
        if (it == schema_.end()) throw std::invalid_argument("undeclared blackboard key '" + key + "'");
        if (!std::holds_alternative<std::monostate>(value) && !holds_type(value, it->second)) {
            throw std::invalid_argument("blackboard key '" + key + "' is declared " +
                                        to_string(it->second));
        }
        values_[key] = std::move(value);
    }

    void clear(const std::string& key) { set(key, std::monostate{}); }

    bool operator==(const Blackboard&) const = default;

private:
    BlackboardSchema schema_;
    std::map<std::string, BlackboardValue> values_;
};

}  // namespace evobt
