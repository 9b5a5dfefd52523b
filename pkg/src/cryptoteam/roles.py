from __future__ import annotations

from enum import Enum


class RoleId(str, Enum):
    CryptoFactor = "CryptoFactor"
    Technical = "Technical"
    MarketFactor = "MarketFactor"
    News = "News"
    Explainer = "Explainer"
    Judge = "Judge"

    @property
    def is_expert(self) -> bool:
        return self in EXPERT_ROLES

    @property
    def dataset_name(self) -> str:
        """File stem of the role's fine-tune dataset (``crypto-factor`` ...)."""
        if not self.is_expert:
            raise ValueError(f"{self.value} has no fine-tune dataset")
        return {
            RoleId.CryptoFactor: "crypto-factor",
            RoleId.Technical: "technical",
            RoleId.MarketFactor: "market-factor",
            RoleId.News: "news",
        }[self]

    @property
    def team(self) -> str:
        if self in (RoleId.MarketFactor, RoleId.News):
            return "Market"
        if self in (RoleId.CryptoFactor, RoleId.Technical):
            return "Crypto"
        return "Support"


EXPERT_ROLES = (RoleId.CryptoFactor, RoleId.Technical, RoleId.MarketFactor, RoleId.News)
MARKET_TEAM = (RoleId.MarketFactor, RoleId.News)
CRYPTO_TEAM = (RoleId.CryptoFactor, RoleId.Technical)
