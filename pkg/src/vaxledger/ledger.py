"""Embedded append-only blockchain.

Transactions follow the IEEE 2418.2 element split (account / transaction /
entity / contract data). Blocks carry a Merkle root over the canonical
transaction bytes (odd nodes pair with themselves), a hash pointer to the
previous block and a proof-of-work nonce. A single writer mines; there are
no competing miners, forks or gossip.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import crypto
from .errors import ConflictError, SchemaError

TX_REGISTRATION = "Registration"
TX_VACCINATION = "Vaccination"

GENESIS_PREVIOUS_HASH = "0" * 64
GENESIS_MERKLE_ROOT = "0" * 64

DEFAULT_DIFFICULTY = 8
DEFAULT_BATCH_SIZE = 16


@dataclass
class AccountData:
    address: str
    public_key: bytes
    account_type: str                      # "agency" | "center"
    assets: dict[str, int] = field(default_factory=dict)


@dataclass
class EntityData:
    sender_address: str
    amount: int
    fees: int
    additional_data: str
    memo_primary_key: str
    memo_hash: str


@dataclass
class ContractData:
    code_id: str
    version: str
    storage_ref: str


@dataclass
class LedgerTransaction:
    tx_id: str
    tx_type: str
    signer_address: str
    timestamp: str
    entity: EntityData
    contract_ref: str
    signature: bytes = b""

    def canonical_fields(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "tx_type": self.tx_type,
            "signer_address": self.signer_address,
            "timestamp": self.timestamp,
            "contract_ref": self.contract_ref,
            "entity.sender_address": self.entity.sender_address,
            "entity.amount": self.entity.amount,
            "entity.fees": self.entity.fees,
            "entity.additional_data": self.entity.additional_data,
            "entity.memo_primary_key": self.entity.memo_primary_key,
            "entity.memo_hash": self.entity.memo_hash,
        }


@dataclass
class BlockHeader:
    height: int
    previous_hash: str
    merkle_root: str
    timestamp: str
    block_size: int
    nonce: int = 0
    difficulty: int = DEFAULT_DIFFICULTY
    block_address: str = ""

    def canonical_fields(self) -> dict:
        return {
            "height": self.height,
            "previous_hash": self.previous_hash,
            "merkle_root": self.merkle_root,
            "timestamp": self.timestamp,
            "block_size": self.block_size,
            "nonce": self.nonce,
            "difficulty": self.difficulty,
        }


@dataclass
class Block:
    header: BlockHeader
    transactions: list[LedgerTransaction]


# -- transactions -------------------------------------------------------------

def transaction_bytes(tx: LedgerTransaction) -> bytes:
    """Canonical signing/hashing bytes; excludes the signature."""
    return crypto.canonical_record_bytes(tx.canonical_fields())


def new_transaction(
    tx_type: str,
    signer: AccountData,
    private_seed: bytes,
    entity: EntityData,
    tx_id: str,
    timestamp: str,
    contract_ref: str,
) -> LedgerTransaction:
    """Build and sign a transaction; amount must be 1 and fees 0."""
    if entity.amount != 1 or entity.fees != 0:
        raise SchemaError("bad-entity", "transactions carry amount 1 and fees 0")
    tx = LedgerTransaction(
        tx_id=tx_id,
        tx_type=tx_type,
        signer_address=signer.address,
        timestamp=timestamp,
        entity=entity,
        contract_ref=contract_ref,
    )
    tx.signature = crypto.sign(transaction_bytes(tx), private_seed)
    return tx


def verify_transaction(tx: LedgerTransaction, public_key: bytes) -> bool:
    return crypto.verify(tx.signature, transaction_bytes(tx), public_key)


# -- merkle tree ---------------------------------------------------------------

def _leaf_hashes(transactions: list[LedgerTransaction]) -> list[bytes]:
    return [crypto.sha256_raw(transaction_bytes(tx)) for tx in transactions]


def _levels(leaves: list[bytes]) -> list[list[bytes]]:
    levels = [leaves]
    while len(levels[-1]) > 1:
        prev = levels[-1]
        nxt = []
        for i in range(0, len(prev), 2):
            left = prev[i]
            right = prev[i + 1] if i + 1 < len(prev) else prev[i]
            nxt.append(crypto.sha256_raw(left + right))
        levels.append(nxt)
    return levels


def merkle_root(transactions: list[LedgerTransaction]) -> str:
    """Root over canonical transaction hashes, hex encoded.

    A level with an odd node count duplicates its last node; a single
    transaction is its own root.
    """
    if not transactions:
        raise SchemaError("empty-list", "merkle root of zero transactions is undefined")
    return _levels(_leaf_hashes(transactions))[-1][0].hex()


def merkle_proof(transactions: list[LedgerTransaction], index: int) -> list[tuple[str, str]]:
    """Sibling path for the leaf at ``index`` as (digest hex, 'L'|'R') pairs."""
    if not transactions:
        raise SchemaError("empty-list", "no transactions to prove")
    if not 0 <= index < len(transactions):
        raise SchemaError("index-out-of-range", f"index {index} out of range")
    proof = []
    levels = _levels(_leaf_hashes(transactions))
    for level in levels[:-1]:
        if index % 2 == 0:
            sibling = index + 1 if index + 1 < len(level) else index
            proof.append((level[sibling].hex(), "R"))
        else:
            proof.append((level[index - 1].hex(), "L"))
        index //= 2
    return proof


def verify_merkle_proof(leaf_hash: str, proof: list[tuple[str, str]], root: str) -> bool:
    node = bytes.fromhex(leaf_hash)
    for sibling_hex, side in proof:
        sibling = bytes.fromhex(sibling_hex)
        node = crypto.sha256_raw(sibling + node if side == "L" else node + sibling)
    return node.hex() == root


# -- blocks and mining -----------------------------------------------------------

def header_bytes(header: BlockHeader) -> bytes:
    return crypto.canonical_record_bytes(header.canonical_fields())


def leading_zero_bits(digest_hex: str) -> int:
    value = int(digest_hex, 16)
    return 256 - value.bit_length()


def _block_size(transactions: list[LedgerTransaction]) -> int:
    return sum(len(transaction_bytes(tx)) + len(tx.signature) for tx in transactions)


def _mine_header(header: BlockHeader) -> BlockHeader:
    # Nonce search from 0; the recorded address is the qualifying digest.
    header.nonce = 0
    while True:
        digest = crypto.sha256_hex(header_bytes(header))
        if leading_zero_bits(digest) >= header.difficulty:
            header.block_address = digest
            return header
        header.nonce += 1


def make_genesis(difficulty: int, timestamp: str) -> Block:
    header = BlockHeader(
        height=0,
        previous_hash=GENESIS_PREVIOUS_HASH,
        merkle_root=GENESIS_MERKLE_ROOT,
        timestamp=timestamp,
        block_size=0,
        difficulty=difficulty,
    )
    return Block(header=_mine_header(header), transactions=[])


def mine_block(
    chain: Chain,
    pending: list[LedgerTransaction],
    difficulty: int,
    timestamp: str,
) -> Block:
    """Assemble and proof-of-work a block on top of the current tip."""
    if not pending:
        raise SchemaError("empty-pending", "refusing to mine an empty block")
    tip = chain.tip
    header = BlockHeader(
        height=tip.header.height + 1,
        previous_hash=tip.header.block_address,
        merkle_root=merkle_root(pending),
        timestamp=timestamp,
        block_size=_block_size(pending),
        difficulty=difficulty,
    )
    return Block(header=_mine_header(header), transactions=list(pending))


@dataclass
class ChainReport:
    ok: bool
    first_bad_height: int | None = None
    reason: str | None = None


class Chain:
    """Committed blocks plus the off-chain account and contract registries."""

    def __init__(self, difficulty: int = DEFAULT_DIFFICULTY, timestamp: str = "1970-01-01T00:00:00Z"):
        self.difficulty = difficulty
        self.accounts: dict[str, AccountData] = {}
        self.contracts: dict[str, ContractData] = {
            "registration-v1": ContractData("registration-v1", "1", "store://citizens"),
            "vaccination-v1": ContractData("vaccination-v1", "1", "store://vaccinations"),
        }
        self.blocks: list[Block] = [make_genesis(difficulty, timestamp)]
        self._tx_index: dict[str, tuple[int, LedgerTransaction]] = {}

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.tip.header.height

    def register_account(self, account: AccountData) -> None:
        if account.address in self.accounts:
            raise ConflictError("duplicate-key", f"account {account.address} exists")
        self.accounts[account.address] = account

    def append_block(self, block: Block) -> None:
        """Validate against the tip and commit."""
        problem = self._block_problem(block, self.tip)
        if problem:
            raise ConflictError("invalid-block", problem)
        self.blocks.append(block)
        for tx in block.transactions:
            self._tx_index[tx.tx_id] = (block.header.height, tx)

    def get_transaction(self, tx_id: str) -> tuple[int, LedgerTransaction] | None:
        return self._tx_index.get(tx_id)

    def transactions(self):
        for block in self.blocks:
            for tx in block.transactions:
                yield block.header.height, tx

    def _block_problem(self, block: Block, previous: Block | None) -> str | None:
        header = block.header
        if previous is None:
            if header.height != 0:
                return "height-mismatch"
            if header.previous_hash != GENESIS_PREVIOUS_HASH:
                return "previous-hash-mismatch"
            expected_root = GENESIS_MERKLE_ROOT if not block.transactions else merkle_root(block.transactions)
        else:
            if header.height != previous.header.height + 1:
                return "height-mismatch"
            if header.previous_hash != previous.header.block_address:
                return "previous-hash-mismatch"
            if not block.transactions:
                return "empty-transactions"
            expected_root = merkle_root(block.transactions)
        if header.merkle_root != expected_root:
            return "merkle-root-mismatch"
        recomputed = crypto.sha256_hex(header_bytes(header))
        if recomputed != header.block_address:
            return "block-address-mismatch"
        if leading_zero_bits(header.block_address) < header.difficulty:
            return "insufficient-difficulty"
        for tx in block.transactions:
            account = self.accounts.get(tx.signer_address)
            if account is None:
                return "unknown-signer"
            if not verify_transaction(tx, account.public_key):
                return "bad-signature"
        return None

    # -- export / import ----------------------------------------------------------

    def export_jsonl(self, path: str | Path) -> None:
        """One block object per line, fields in canonical order, hex digests."""
        with open(path, "w", encoding="utf-8") as fh:
            for block in self.blocks:
                fh.write(json.dumps(block_to_dict(block), sort_keys=True))
                fh.write("\n")

    @classmethod
    def import_jsonl(cls, path: str | Path, accounts: dict[str, AccountData] | None = None) -> Chain:
        chain = cls.__new__(cls)
        chain.accounts = dict(accounts or {})
        chain.contracts = {}
        chain.blocks = []
        chain._tx_index = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    chain.blocks.append(block_from_dict(json.loads(line)))
        if not chain.blocks:
            raise SchemaError("empty-list", "chain file holds no blocks")
        chain.difficulty = chain.blocks[0].header.difficulty
        for block in chain.blocks:
            for tx in block.transactions:
                chain._tx_index[tx.tx_id] = (block.header.height, tx)
        return chain


def verify_chain(chain: Chain) -> ChainReport:
    """Walk the chain checking linkage, roots, difficulty, addresses and
    signatures; report the first failing height."""
    previous = None
    for i, block in enumerate(chain.blocks):
        if block.header.height != i:
            return ChainReport(False, i, "height-mismatch")
        problem = chain._block_problem(block, previous)
        if problem:
            return ChainReport(False, i, problem)
        previous = block
    return ChainReport(True)


class Ledger:
    """Chain plus the pending pool; mines on batch fill or explicit flush."""

    def __init__(
        self,
        difficulty: int = DEFAULT_DIFFICULTY,
        batch_size: int = DEFAULT_BATCH_SIZE,
        clock=None,
    ):
        from .runtime import SystemClock

        self.clock = clock or SystemClock()
        self.batch_size = batch_size
        self.chain = Chain(difficulty, crypto.rfc3339(self.clock.now()))
        self.pending: list[LedgerTransaction] = []
        self.nonce_history: list[int] = []

    def submit(self, tx: LedgerTransaction) -> None:
        self.pending.append(tx)
        if len(self.pending) >= self.batch_size:
            self.flush()

    def flush(self) -> None:
        if not self.pending:
            return
        block = mine_block(
            self.chain, self.pending, self.chain.difficulty, crypto.rfc3339(self.clock.now())
        )
        self.chain.append_block(block)
        self.nonce_history.append(block.header.nonce)
        self.pending = []


# -- wire format -----------------------------------------------------------------

def tx_to_dict(tx: LedgerTransaction) -> dict:
    return {
        "txID": tx.tx_id,
        "txType": tx.tx_type,
        "signerAddress": tx.signer_address,
        "timestamp": tx.timestamp,
        "entity": {
            "senderAddress": tx.entity.sender_address,
            "amount": tx.entity.amount,
            "fees": tx.entity.fees,
            "additionalData": tx.entity.additional_data,
            "memoPrimaryKey": tx.entity.memo_primary_key,
            "memoHash": tx.entity.memo_hash,
        },
        "contractRef": tx.contract_ref,
        "signature": tx.signature.hex(),
    }


def tx_from_dict(data: dict) -> LedgerTransaction:
    entity = data["entity"]
    return LedgerTransaction(
        tx_id=data["txID"],
        tx_type=data["txType"],
        signer_address=data["signerAddress"],
        timestamp=data["timestamp"],
        entity=EntityData(
            sender_address=entity["senderAddress"],
            amount=entity["amount"],
            fees=entity["fees"],
            additional_data=entity["additionalData"],
            memo_primary_key=entity["memoPrimaryKey"],
            memo_hash=entity["memoHash"],
        ),
        contract_ref=data["contractRef"],
        signature=bytes.fromhex(data["signature"]),
    )


def block_to_dict(block: Block) -> dict:
    h = block.header
    return {
        "header": {
            "height": h.height,
            "previousHash": h.previous_hash,
            "merkleRoot": h.merkle_root,
            "timestamp": h.timestamp,
            "blockSize": h.block_size,
            "nonce": h.nonce,
            "difficulty": h.difficulty,
            "blockAddress": h.block_address,
        },
        "transactions": [tx_to_dict(tx) for tx in block.transactions],
    }


def block_from_dict(data: dict) -> Block:
    h = data["header"]
    header = BlockHeader(
        height=h["height"],
        previous_hash=h["previousHash"],
        merkle_root=h["merkleRoot"],
        timestamp=h["timestamp"],
        block_size=h["blockSize"],
        nonce=h["nonce"],
        difficulty=h["difficulty"],
        block_address=h["blockAddress"],
    )
    return Block(header=header, transactions=[tx_from_dict(t) for t in data["transactions"]])


def clone_chain(chain: Chain) -> Chain:
    """Deep copy for tamper experiments; shares nothing with the original."""
    return copy.deepcopy(chain)
