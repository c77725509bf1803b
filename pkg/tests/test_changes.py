import random

import pytest

import fixture_world as fw
from diff_oracle import git_diff, lcs_diff, random_pair, text_lines
from vulnmine.changes import (
    ChangeType, DiffParseError, apply_diff, extract, extract_commit, extract_file_changes,
    extract_method_changes, file_change_id, parse_diff,
)
from vulnmine.forges import RepoUnavailable
from vulnmine.gitrepo import CommitNotFound, clone_repo, open_repo


@pytest.fixture(scope="module")
def repos(world):
    return {name: open_repo(path, fw.REPO_URLS[name]) for name, path in world.repos.items()}


def by_path(files):
    return {f.new_path or f.old_path: f for f in files}


# -- parse_diff ------------------------------------------------------------------

def test_parse_empty():
    parsed = parse_diff("")
    assert parsed.added == [] and parsed.deleted == []


def test_parse_minimal_hunk():
    parsed = parse_diff("@@ -1 +1 @@\n-old\n+new")
    assert parsed.added == [(1, "new")] and parsed.deleted == [(1, "old")]


def test_parse_ignores_headers_context_and_markers():
    diff = ("diff --git a/f b/f\nindex 1..2 100644\n--- a/f\n+++ b/f\n"
            "@@ -2,3 +2,3 @@ ctx\n keep\n-gone\n\\ No newline at end of file\n+came\n\\ No newline at end of file\n")
    parsed = parse_diff(diff)
    assert parsed.deleted == [(3, "gone")] and parsed.added == [(3, "came")]


def test_parse_multiple_hunks_and_pure_insertion():
    diff = "@@ -0,0 +1,2 @@\n+a\n+b\n@@ -10,2 +12,1 @@\n x\n-y\n"
    parsed = parse_diff(diff)
    assert parsed.added == [(1, "a"), (2, "b")]
    assert parsed.deleted == [(11, "y")]


def test_malformed_header():
    with pytest.raises(DiffParseError) as info:
        parse_diff("@@ -x +1 @@\n+a\n")
    assert info.value.header == "@@ -x +1 @@"


def test_diff_oracle_100_random_pairs(tmp_path):
    rng = random.Random(20210105)
    for _ in range(100):
        before, after = random_pair(rng)
        diff = git_diff(before, after, tmp_path)
        parsed = parse_diff(diff)
        added, deleted = lcs_diff(text_lines(before), text_lines(after))
        assert parsed.added == added
        assert parsed.deleted == deleted
        assert apply_diff(before, diff) == after


def test_round_trip_duplicate_heavy_pairs(tmp_path):
    # duplicates make the LCS ambiguous, but the edit must still be minimal and re-apply exactly
    rng = random.Random(7)
    for _ in range(40):
        vocab = ["a", "b", "", "}", "  x;"]
        before = "\n".join(rng.choice(vocab) for _ in range(rng.randint(0, 25)))
        after = "\n".join(rng.choice(vocab) for _ in range(rng.randint(0, 25)))
        before += "\n" if before and rng.random() < 0.7 else ""
        after += "\n" if after and rng.random() < 0.7 else ""
        diff = git_diff(before, after, tmp_path)
        parsed = parse_diff(diff)
        oracle_added, oracle_deleted = lcs_diff(text_lines(before), text_lines(after))
        assert len(parsed.added) == len(oracle_added)
        assert len(parsed.deleted) == len(oracle_deleted)
        assert apply_diff(before, diff) == after


# -- repository access ---------------------------------------------------------------

def test_clone_and_head(git_urls, tmp_path):
    with clone_repo(fw.REPO_URLS["parser"], tmp_path / "work") as repo:
        assert repo.head() == git_urls.commits["A4"]
        assert repo.path.exists()
    assert not repo.path.exists()


def test_clone_nonexistent(git_urls, tmp_path):
    with pytest.raises(RepoUnavailable):
        clone_repo(fw.REPO_URLS["vanished"], tmp_path / "work")


def test_abbreviated_hash(world, repos):
    full = world.commits["A2"]
    assert repos["parser"].expand(full[:7]) == full
    assert repos["parser"].expand(full.upper()[:10].lower()) == full


def test_unknown_hash(repos):
    with pytest.raises(CommitNotFound):
        extract_commit(repos["parser"], "f" * 40)


# -- commits and files ------------------------------------------------------------------

def test_merge_commit(world, repos):
    commit = extract_commit(repos["parser"], world.commits["A4"])
    assert commit.is_merge
    assert not extract_commit(repos["parser"], world.commits["A1"]).is_merge


def test_line_counts_across_two_files(world, repos):
    result = extract(repos["parser"], world.commits["A2"])
    assert (result.commit.num_lines_added, result.commit.num_lines_deleted) == (3, 1)
    assert len(result.files) == 2
    assert sum(f.num_lines_added for f in result.files) == result.commit.num_lines_added


def test_commit_metadata(world, repos):
    commit = extract_commit(repos["parser"], world.commits["A1"])
    assert commit.hash == world.commits["A1"]
    assert commit.author_name == "Dana Maintainer"
    assert commit.author_date == commit.committer_date == "2020-02-11T00:00:00Z"
    assert commit.message == "Clamp header length before copying\n\nFixes an overflow."
    assert commit.repo_url == fw.REPO_URLS["parser"]


def test_root_commit(world, repos):
    files = extract_file_changes(repos["tool"], world.commits["C0"])
    assert [f.change_type for f in files] == [ChangeType.ADDED]
    assert files[0].code_before is None and files[0].code_after == fw.MAIN_GO_V0
    assert files[0].num_lines_added == 11 and files[0].old_path is None


def test_rename_without_edit(world, repos):
    files = by_path(extract_file_changes(repos["webapp"], world.commits["B1"]))
    renamed = files["lib/new_name.js"]
    assert renamed.change_type is ChangeType.RENAMED
    assert renamed.old_path == "old_name.js" and renamed.filename == "new_name.js"
    assert renamed.diff_parsed.added == [] and renamed.diff_parsed.deleted == []
    assert "rename from old_name.js" in renamed.diff


def test_binary_file(world, repos):
    logo = by_path(extract_file_changes(repos["parser"], world.commits["A1"]))["logo.png"]
    assert "Binary files" in logo.diff
    assert logo.diff_parsed.added == [] and logo.diff_parsed.deleted == []
    assert logo.code_before is None and logo.code_after is None
    assert logo.programming_language is None and logo.nloc is None


def test_one_added_one_deleted_matches_git(world, repos):
    parse_c = by_path(extract_file_changes(repos["parser"], world.commits["A1"]))["src/parse.c"]
    assert parse_c.diff_parsed.deleted == [(11, "    int n = len;")]
    assert parse_c.diff_parsed.added == [(11, "    int n = clamp(len, 64);")]
    assert parse_c.programming_language == "C"
    assert parse_c.code_before == fw.PARSE_C_V0 and parse_c.code_after == fw.PARSE_C_V1


def test_merge_diffs_against_first_parent(world, repos):
    files = by_path(extract_file_changes(repos["parser"], world.commits["A4"]))
    # parse.c changed only on the feature branch, check.py only on main
    assert list(files) == ["src/parse.c"]
    assert [n for n, _ in files["src/parse.c"].diff_parsed.added] == [14, 15]


def test_round_trip_on_fixture_files(world, repos):
    checked = 0
    for name, label in [("parser", "A1"), ("parser", "A2"), ("parser", "A4"), ("webapp", "B1"),
                        ("webapp", "B2"), ("tool", "C1")]:
        for f in extract_file_changes(repos[name], world.commits[label]):
            if f.change_type is ChangeType.MODIFIED and f.code_before is not None:
                assert apply_diff(f.code_before, f.diff) == f.code_after
                checked += 1
    assert checked == 7


def test_readme_without_final_newline(world, repos):
    readme = by_path(extract_file_changes(repos["parser"], world.commits["A2"]))["README.md"]
    assert not readme.code_after.endswith("\n")
    assert apply_diff(readme.code_before, readme.diff) == fw.README_V1


def test_deterministic_ids(world, repos):
    first = extract(repos["parser"], world.commits["A1"])
    second = extract(repos["parser"], world.commits["A1"])
    assert first == second
    f = by_path(first.files)["src/parse.c"]
    assert f.file_change_id == file_change_id(fw.REPO_URLS["parser"], world.commits["A1"], "src/parse.c", "src/parse.c")
    assert len(f.file_change_id) == 32
    assert len({m.method_change_id for m in first.methods}) == len(first.methods)


# -- methods ------------------------------------------------------------------------------

def brute_force_hits(spans, lines):
    return {s.name for s in spans if any(s.start_line <= n <= s.end_line for n in lines)}


def test_single_deleted_line_inside_function(world, repos):
    from vulnmine.metrics import find_methods

    parse_c = by_path(extract_file_changes(repos["parser"], world.commits["A1"]))["src/parse.c"]
    methods = extract_method_changes(parse_c)
    before = [m for m in methods if m.before_change]
    assert [m.name for m in before] == ["parse_header"]
    spans = find_methods(parse_c.code_before, "C")
    assert brute_force_hits(spans, [n for n, _ in parse_c.diff_parsed.deleted]) == {"parse_header"}


def test_added_and_deleted_in_same_function(world, repos):
    app = by_path(extract_file_changes(repos["webapp"], world.commits["B1"]))["app.js"]
    methods = extract_method_changes(app)
    assert sorted((m.name, m.before_change) for m in methods) == [("render", False), ("render", True)]


def test_comment_only_change_yields_no_methods(world, repos):
    parse_c = by_path(extract_file_changes(repos["parser"], world.commits["A1"]))["src/parse.c"]
    edited = parse_c.code_after.replace("/* Header parser", "/* Wire header parser")
    from dataclasses import replace
    from vulnmine.changes import DiffParsed

    comment_only = replace(parse_c, code_before=parse_c.code_after, code_after=edited,
                           diff_parsed=DiffParsed([(1, edited.split("\n")[0])], [(1, parse_c.code_after.split("\n")[0])]))
    assert extract_method_changes(comment_only) == []


def test_unsupported_language_has_no_methods(world, repos):
    readme = by_path(extract_file_changes(repos["parser"], world.commits["A2"]))["README.md"]
    assert extract_method_changes(readme) == []


def test_method_code_is_file_slice(world, repos):
    for name, label in [("parser", "A1"), ("parser", "A4"), ("tool", "C0"), ("webapp", "B2")]:
        result = extract(repos[name], world.commits[label])
        files = {f.file_change_id: f for f in result.files}
        for m in result.methods:
            f = files[m.file_change_id]
            source = f.code_before if m.before_change else f.code_after
            lines = source.split("\n")
            assert 1 <= m.start_line <= m.end_line <= len(lines)
            assert m.code == "\n".join(lines[m.start_line - 1:m.end_line])
            assert m.complexity >= 1


def test_dmm_fields(world, repos):
    a4 = extract_commit(repos["parser"], world.commits["A4"])
    # parse_header after the merge: 10 nloc, CC 3, three parameters, two added lines
    assert (a4.dmm_unit_size, a4.dmm_unit_complexity, a4.dmm_unit_interfacing) == (1.0, 1.0, 0.0)
    a1 = extract_commit(repos["parser"], world.commits["A1"])
    assert (a1.dmm_unit_size, a1.dmm_unit_complexity, a1.dmm_unit_interfacing) == (0.5, 0.5, 0.5)
