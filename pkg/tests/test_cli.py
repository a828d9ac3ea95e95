import pytest

from app.utils.validators import validate_pattern, validate_problem_document

TWO_POINT = {'kind': 'problem', 'poles': [0, 1], 'weights': [1, 1], 'num_roots': 1}


def _invoke(runner, cli, *args):
    return runner.invoke(cli, [str(a) for a in args])


@pytest.fixture
def pullback_document(pullback_instance):
    gamma = pullback_instance['gammas'][0]
    return {
        'kind': 'problem',
        'poles': [0, 1, 2],
        'weights': [1, 1, 1],
        'moving_poles': [4],
        'num_roots': 1,
        'roots': [[gamma.real, gamma.imag]],
    }


# =============================================================================
# solve
# =============================================================================

def test_solve_two_point(runner, cli, write_json, read_json, tmp_path):
    out = tmp_path / 'solutions.json'
    result = _invoke(runner, cli, 'solve', '-i', write_json('problem.json', TWO_POINT), '-o', out)
    assert result.exit_code == 0

    report = read_json(out)
    assert report['kind'] == 'report'
    assert report['success'] is True
    assert report['command'] == 'solve'
    solutions = report['results']['solutions']
    assert len(solutions) == 1
    re_part, im_part = solutions[0]['roots'][0]
    assert abs(re_part - 0.5) < 1e-10 and abs(im_part) < 1e-10
    assert solutions[0]['eigenvalues'][0][0] == pytest.approx(1.5)


def test_solve_without_roots(runner, cli, write_json, read_json, tmp_path):
    out = tmp_path / 'solutions.json'
    problem = dict(TWO_POINT, num_roots=0)
    result = _invoke(runner, cli, 'solve', '-i', write_json('problem.json', problem), '-o', out)
    assert result.exit_code == 0
    solutions = read_json(out)['results']['solutions']
    assert solutions[0]['roots'] == []
    assert solutions[0]['eigenvalues'][0][0] == pytest.approx(-0.5)


def test_solve_flags_degenerate_problem(runner, cli, write_json, read_json, tmp_path):
    out = tmp_path / 'solutions.json'
    problem = dict(TWO_POINT, weights=[0, 0])
    result = _invoke(runner, cli, 'solve', '-i', write_json('problem.json', problem), '-o', out)
    assert result.exit_code == 0
    results = read_json(out)['results']
    assert results['degenerate'] is True
    assert results['solutions'] == []


def test_solve_is_deterministic(runner, cli, write_json, read_json, tmp_path):
    problem = {'kind': 'problem', 'poles': [0, 1, 2, 3], 'weights': [1, 1, 1, 1], 'num_roots': 2, 'seed': 3}
    path = write_json('problem.json', problem)
    outputs = []
    for name in ('a.json', 'b.json'):
        _invoke(runner, cli, 'solve', '-i', path, '-o', tmp_path / name)
        outputs.append(read_json(tmp_path / name)['results']['solutions'])
    assert outputs[0] == outputs[1]


def test_mismatched_lengths_exit_two(runner, cli, write_json, read_json, tmp_path):
    out = tmp_path / 'error.json'
    problem = dict(TWO_POINT, weights=[1])
    result = _invoke(runner, cli, 'solve', '-i', write_json('problem.json', problem), '-o', out)
    assert result.exit_code == 2
    error = read_json(out)
    assert error['kind'] == 'error'
    assert error['error'] == 'validation_error'


def test_malformed_json_exit_two(runner, cli, tmp_path, read_json):
    path = tmp_path / 'broken.json'
    path.write_text('{"poles": [0, 1')
    out = tmp_path / 'error.json'
    result = _invoke(runner, cli, 'solve', '-i', path, '-o', out)
    assert result.exit_code == 2
    assert read_json(out)['error'] == 'malformed_json'


def test_missing_input_file(runner, cli, read_json, tmp_path):
    out = tmp_path / 'error.json'
    result = _invoke(runner, cli, 'solve', '-i', tmp_path / 'absent.json', '-o', out)
    assert result.exit_code == 2
    assert read_json(out)['error'] == 'unreadable_input'


def test_wrong_document_kind(runner, cli, write_json, tmp_path):
    path = write_json('oper.json', {'kind': 'oper', 'poles': [], 'double_coeffs': [], 'residues': []})
    result = _invoke(runner, cli, 'solve', '-i', path, '-o', tmp_path / 'error.json')
    assert result.exit_code == 2


def test_unknown_subcommand(runner, cli):
    assert _invoke(runner, cli, 'frobnicate').exit_code == 2


def test_version(runner, cli):
    result = _invoke(runner, cli, '--version')
    assert result.exit_code == 0
    assert '1.0.0' in result.output


# =============================================================================
# oper / monodromy
# =============================================================================

def test_oper_then_monodromy(runner, cli, write_json, read_json, tmp_path):
    problem = dict(TWO_POINT, roots=[0.5])
    oper_out = tmp_path / 'oper.json'
    result = _invoke(runner, cli, 'oper', '-i', write_json('problem.json', problem), '-o', oper_out, '--verify')
    assert result.exit_code == 0
    oper = read_json(oper_out)['results']
    assert oper['kind'] == 'oper'
    assert oper['double_coeffs'][0][0] == pytest.approx(0.75)
    assert oper['verification']['monodromy']['signs'] == ['-', '-']

    mono_out = tmp_path / 'monodromy.json'
    result = _invoke(runner, cli, 'monodromy', '-i', oper_out, '-o', mono_out)
    assert result.exit_code == 0
    report = read_json(mono_out)
    assert report['verified'] is True
    assert report['results']['signs'] == ['-', '-']


def test_oper_from_solutions_document(runner, cli, write_json, read_json, tmp_path):
    solutions_out = tmp_path / 'solutions.json'
    _invoke(runner, cli, 'solve', '-i', write_json('problem.json', TWO_POINT), '-o', solutions_out)
    oper_out = tmp_path / 'oper.json'
    result = _invoke(runner, cli, 'oper', '-i', solutions_out, '-o', oper_out, '--index', 0)
    assert result.exit_code == 0
    assert read_json(oper_out)['results']['residues'][0][0] == pytest.approx(1.5)


def test_perturbed_oper_fails_verification(runner, cli, write_json, read_json, tmp_path):
    oper = {
        'kind': 'oper',
        'convention': 'minus',
        'poles': [0, 1],
        'double_coeffs': [0.75, 0.75],
        'residues': [1.6, -1.5],
    }
    out = tmp_path / 'monodromy.json'
    result = _invoke(runner, cli, 'monodromy', '-i', write_json('oper.json', oper), '-o', out)
    assert result.exit_code == 1
    assert read_json(out)['verified'] is False


def test_regular_oper_has_trivial_monodromy(runner, cli, write_json, read_json, tmp_path):
    oper = {'kind': 'oper', 'poles': [0, 1], 'double_coeffs': [0, 0], 'residues': [0, 0]}
    out = tmp_path / 'monodromy.json'
    result = _invoke(runner, cli, 'monodromy', '-i', write_json('oper.json', oper), '-o', out)
    assert result.exit_code == 0
    assert read_json(out)['results']['signs'] == ['+', '+']


def test_monodromy_rejects_bad_base(runner, cli, write_json, tmp_path):
    oper = {'kind': 'oper', 'poles': [0, 1], 'double_coeffs': [0, 0], 'residues': [0, 0]}
    result = _invoke(runner, cli, 'monodromy', '-i', write_json('oper.json', oper),
                     '-o', tmp_path / 'error.json', '--base', 'north')
    assert result.exit_code == 2


# =============================================================================
# pullback / reduce / schlesinger / dual / repcheck
# =============================================================================

def test_pullback_and_reduce(runner, cli, write_json, read_json, tmp_path, pullback_document):
    connection_out = tmp_path / 'connection.json'
    result = _invoke(runner, cli, 'pullback', '-i', write_json('problem.json', pullback_document),
                     '-o', connection_out, '--verify')
    assert result.exit_code == 0
    connection = read_json(connection_out)['results']
    assert connection['kind'] == 'connection'
    assert connection['verification']['normalization']['passed'] is True

    reduced_out = tmp_path / 'reduced.json'
    result = _invoke(runner, cli, 'reduce', '-i', connection_out, '-o', reduced_out, '--verify')
    assert result.exit_code == 0
    reduced = read_json(reduced_out)['results']
    assert reduced['convention'] == 'plus'
    assert reduced['moving_poles'][0][0] == pytest.approx(4.0)


def test_pullback_precondition_failure(runner, cli, write_json, read_json, tmp_path, pullback_document):
    document = dict(pullback_document, roots=[3.0])
    out = tmp_path / 'error.json'
    result = _invoke(runner, cli, 'pullback', '-i', write_json('problem.json', document), '-o', out)
    assert result.exit_code == 3
    assert read_json(out)['error'] == 'bethe_precondition'


def test_schlesinger(runner, cli, write_json, read_json, tmp_path, pullback_document):
    out = tmp_path / 'transform.json'
    result = _invoke(runner, cli, 'schlesinger', '-i', write_json('problem.json', pullback_document),
                     '-o', out, '--at', 0, 1, '--pattern', '+1,+1')
    assert result.exit_code == 0
    transformed = read_json(out)['results']
    assert transformed['kind'] == 'transform'
    assert transformed['problem']['weights'] == [2, 2, 1]
    assert len(transformed['problem']['roots']) == 2


@pytest.mark.parametrize('pattern', ['+1,+1', '+1,-1', '-1,+1', '-1,-1'])
def test_schlesinger_verify(runner, cli, write_json, read_json, tmp_path, pullback_instance,
                            pullback_document, pattern):
    gamma = pullback_instance['gammas'][1]
    document = dict(pullback_document, roots=[[gamma.real, gamma.imag]])
    out = tmp_path / 'transform.json'
    result = _invoke(runner, cli, 'schlesinger', '-i', write_json('problem.json', document),
                     '-o', out, '--at', 0, 1, '--pattern', pattern, '--verify', '--seed', 5)
    assert result.exit_code == 0
    report = read_json(out)
    assert report['verified'] is True
    verification = report['results']['verification']
    assert verification['monodromy_before']['z2'] is True
    assert verification['monodromy_after']['z2'] is True
    assert report['inputs']['seed'] == 5


def test_schlesinger_bad_pattern(runner, cli, write_json, tmp_path, pullback_document):
    result = _invoke(runner, cli, 'schlesinger', '-i', write_json('problem.json', pullback_document),
                     '-o', tmp_path / 'error.json', '--at', 0, 1, '--pattern', '+2,0')
    assert result.exit_code == 2


def test_dual(runner, cli, write_json, read_json, tmp_path, pullback_document):
    out = tmp_path / 'dual.json'
    result = _invoke(runner, cli, 'dual', '-i', write_json('problem.json', pullback_document), '-o', out)
    assert result.exit_code == 0
    dual = read_json(out)['results']
    assert dual['problem']['num_roots'] == 0
    assert len(dual['problem']['moving_poles']) == 1


def test_dual_verify(runner, cli, write_json, read_json, tmp_path, pullback_document):
    out = tmp_path / 'dual.json'
    result = _invoke(runner, cli, 'dual', '-i', write_json('problem.json', pullback_document), '-o', out,
                     '--verify', '--tol', 1e-8, '--seed', 2)
    assert result.exit_code == 0
    report = read_json(out)
    assert report['verified'] is True
    assert report['tolerances']['bethe_tol'] == 1e-8
    assert report['results']['verification']['connection_residual'] < 1e-5


def test_repcheck(runner, cli, write_json, read_json, tmp_path):
    out = tmp_path / 'repcheck.json'
    problem = {'kind': 'problem', 'poles': [0, 1, 2], 'weights': [1, 1, 1], 'num_roots': 1}
    result = _invoke(runner, cli, 'repcheck', '-i', write_json('problem.json', problem), '-o', out)
    assert result.exit_code == 0
    report = read_json(out)['results']
    assert report['dimension'] == 8
    assert report['commutator_norm'] < 1e-11
    assert all(row['in_spectrum'] for row in report['solutions'])


# =============================================================================
# Validators
# =============================================================================

def test_validate_pattern():
    assert validate_pattern('+1,-1') == (True, (1, -1), None)
    assert validate_pattern('-1, -1')[1] == (-1, -1)
    assert not validate_pattern('1')[0]
    assert not validate_pattern('x,y')[0]


def test_validate_problem_document():
    assert validate_problem_document(TWO_POINT) == (True, [])
    ok, errors = validate_problem_document({'poles': [0, 0], 'weights': [1, 1]})
    assert not ok
    assert any('coincide' in e for e in errors)
    ok, errors = validate_problem_document({'poles': 'x', 'weights': [1], 'num_roots': -1})
    assert not ok
    assert len(errors) >= 2
